use std::fmt::Write as _;

use ctccrf::io::encode_matrix;
use ctccrf::lm::{emit_arpa, estimate, estimate_with_vocabulary, parse_corpus};
use ctccrf::synthetic::{generate_toy, ToyConfig, ToyUtterance};
use ctccrf::Alphabet;

use crate::cli::{LmTrainArgs, SynthArgs};
use crate::data::read_alphabet;
use crate::error::{data, CliResult};
use crate::fsutil::{read_to_string, write_atomic};

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let config = ToyConfig {
        num_labels: args.num_labels,
        feature_dim: args.feature_dim,
        noise: args.noise,
        train: args.train_size,
        heldout: args.test_size,
        seed: args.seed,
        ..ToyConfig::default()
    };
    let toy = generate_toy(&config)?;
    let alphabet: String = toy.alphabet.labels().iter().map(|l| format!("{l}\n")).collect();
    write_atomic(&args.dir.join("alphabet.txt"), alphabet.as_bytes())?;
    let mut corpus = String::new();
    for (name, set) in [("train", &toy.train), ("test", &toy.heldout)] {
        write_set(args, name, set, &toy.alphabet)?;
        if name == "train" {
            for u in set {
                let _ = writeln!(corpus, "{}", toy.alphabet.decode(&u.labels).join(" "));
            }
        }
    }
    write_atomic(&args.dir.join("corpus.txt"), corpus.as_bytes())?;
    eprintln!(
        "wrote {} train and {} test utterances to {}",
        toy.train.len(),
        toy.heldout.len(),
        args.dir.display()
    );
    Ok(())
}

fn write_set(args: &SynthArgs, name: &str, set: &[ToyUtterance], alphabet: &Alphabet) -> CliResult<()> {
    let dir = args.dir.join(name);
    let mut labels = String::new();
    let mut scp = String::new();
    for u in set {
        let rel = format!("feats/{}.catm", u.id);
        write_atomic(&dir.join(&rel), &encode_matrix(&u.features))?;
        let _ = writeln!(labels, "{}\t{}", u.id, alphabet.decode(&u.labels).join(" "));
        let _ = writeln!(scp, "{}\t{rel}", u.id);
    }
    write_atomic(&dir.join("labels.txt"), labels.as_bytes())?;
    write_atomic(&dir.join("feats.scp"), scp.as_bytes())
}

pub fn lm_train(args: &LmTrainArgs) -> CliResult<()> {
    let corpus = parse_corpus(&read_to_string(&args.corpus)?);
    if corpus.is_empty() {
        return Err(data(format!("{}: corpus is empty", args.corpus.display())));
    }
    let lm = match &args.alphabet {
        Some(path) => {
            let alphabet = read_alphabet(path)?;
            if let Some(w) = corpus.iter().flatten().find(|w| alphabet.state_id(w).is_none()) {
                return Err(data(format!("corpus word `{w}` is not in the alphabet")));
            }
            estimate_with_vocabulary(&corpus, args.order, args.discount, alphabet.labels())?
        }
        None => estimate(&corpus, args.order, args.discount)?,
    };
    write_atomic(&args.out, emit_arpa(&lm).as_bytes())?;
    let counts: Vec<String> = (1..=lm.order()).map(|n| lm.count(n).to_string()).collect();
    eprintln!("order {} LM with n-gram counts {}", lm.order(), counts.join("/"));
    Ok(())
}
