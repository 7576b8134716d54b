use std::fmt::Write as _;

use ctccrf::acoustic::{encode_checkpoint, format_metrics, train_with, LayerSpec, ModelParams, Optimizer, TrainConfig};
use ctccrf::gradcheck::{run_gradcheck, GradCheckConfig};
use ctccrf::Error;

use crate::cli::{GradcheckArgs, OptimizerKind, TrainArgs};
use crate::data::{alphabet_path, load_set, model_dir, read_alphabet, read_den_table};
use crate::error::{data, CliError, CliResult};
use crate::fsutil::write_atomic;

pub fn gradcheck(args: &GradcheckArgs) -> CliResult<()> {
    let config = GradCheckConfig {
        trials: args.trials,
        frames: args.frames,
        num_labels: args.num_labels,
        lm_order: args.lm_order,
        alpha: args.alpha,
        step: args.step,
        tolerance: args.tolerance,
        model_layers: (!args.no_model).then(|| args.model_layers.clone()),
        model_tolerance: args.model_tolerance,
        seed: args.seed,
        ..GradCheckConfig::default()
    };
    let report = run_gradcheck(&config)?;
    println!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Numerical("gradient check failed".into()))
    }
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let config = TrainConfig {
        alpha: args.alpha,
        learning_rate: args.lr,
        optimizer: match args.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::default(),
        },
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        clip_norm: (args.clip > 0.0).then_some(args.clip),
        dropout: args.dropout,
    };
    config.validate()?;
    let specs = LayerSpec::parse_list(&args.layers)?;

    let alphabet = read_alphabet(&alphabet_path(&args.work))?;
    let den = read_den_table(&args.work)?;
    if den.width() != alphabet.num_states() {
        return Err(data(format!(
            "denominator graph covers {} states but the alphabet has {}",
            den.width(),
            alphabet.num_states()
        )));
    }
    let train_set: Vec<_> = load_set(&args.work, &args.set, &alphabet)?
        .into_iter()
        .map(|u| u.example)
        .collect();
    let heldout: Vec<_> = match &args.heldout_set {
        Some(set) => load_set(&args.work, set, &alphabet)?.into_iter().map(|u| u.example).collect(),
        None => Vec::new(),
    };
    let input_dim = train_set[0].features.cols();
    if let Some(e) = heldout.iter().find(|e| e.features.cols() != input_dim) {
        return Err(data(format!(
            "held-out features have {} dims, training features {input_dim}",
            e.features.cols()
        )));
    }
    let model = ModelParams::new(input_dim, &specs, alphabet.num_states(), args.seed)?;
    eprintln!(
        "training {} parameters on {} utterances",
        model.num_parameters(),
        train_set.len()
    );

    let dir = model_dir(&args.work);
    let mut metrics = String::from("epoch\tobjective\ttoken_error\n");
    let result = train_with(&config, model, &train_set, &heldout, &den, |m, params| {
        let _ = writeln!(metrics, "{}", format_metrics(m));
        eprintln!(
            "epoch {:3}  objective {:.6}  token error {:.2}%",
            m.epoch,
            m.objective,
            100.0 * m.token_error
        );
        write_atomic(&dir.join(format!("epoch-{:03}.ckpt", m.epoch)), &encode_checkpoint(params))
            .map_err(|e| Error::Format { what: "checkpoint", msg: e.to_string() })
    });
    write_atomic(&dir.join("metrics.tsv"), metrics.as_bytes())?;
    match result {
        Ok((model, _)) => write_atomic(&dir.join("final.ckpt"), &encode_checkpoint(&model)),
        Err(Error::Diverged { epoch, last_good }) => {
            write_atomic(&dir.join("last-good.ckpt"), &encode_checkpoint(&last_good))?;
            Err(CliError::Numerical(format!(
                "training diverged at epoch {epoch}; last good parameters saved to {}",
                dir.join("last-good.ckpt").display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}
