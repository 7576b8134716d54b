use ctccrf::acoustic::{
    decode_checkpoint, encode_checkpoint, format_metrics, train, LayerSpec, ModelParams, Optimizer,
    TrainConfig,
};
use ctccrf::gradcheck::model_gradient_error;
use ctccrf::synthetic::{generate_toy, ToyConfig, ToyTask};
use ctccrf::Error;

fn small_task(train: usize, seed: u64) -> ToyTask {
    let data = generate_toy(&ToyConfig {
        train,
        heldout: 10,
        seed,
        ..Default::default()
    })
    .unwrap();
    ToyTask::new(&data, 2).unwrap()
}

fn model(layers: &str, seed: u64) -> ModelParams {
    ModelParams::new(8, &LayerSpec::parse_list(layers).unwrap(), 6, seed).unwrap()
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let task = small_task(3, 7);
    for layers in ["affine:8,tanh", "rnn:5", "affine:6,tanh,birnn:4"] {
        let m = model(layers, 1);
        assert!(m.num_parameters() <= 500, "{layers}: {}", m.num_parameters());
        let err = model_gradient_error(&m, &task.train, &task.den, 0.1, 1e-4).unwrap();
        assert!(err <= 1e-3, "{layers}: {err}");
    }
}

#[test]
fn sgd_objective_rises_over_the_first_epochs() {
    let mut monotone = 0;
    for seed in 0..10 {
        let task = small_task(60, seed);
        let config = TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 0.01,
            epochs: 5,
            seed,
            ..Default::default()
        };
        let (_, metrics) = train(&config, model("affine:16,tanh", seed), &task.train, &task.heldout, &task.den).unwrap();
        let rising = metrics.windows(2).all(|w| w[1].objective >= w[0].objective);
        eprintln!(
            "seed {seed}: {:?} {}",
            metrics.iter().map(|m| m.objective).collect::<Vec<_>>(),
            if rising { "monotone" } else { "NOT monotone" }
        );
        monotone += usize::from(rising);
    }
    assert!(monotone >= 9, "only {monotone}/10 seeds were monotone");
}

#[test]
fn training_is_reproducible_across_pool_sizes() {
    let task = small_task(24, 3);
    let config = TrainConfig {
        epochs: 3,
        batch_size: 4,
        dropout: 0.1,
        seed: 5,
        ..Default::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&config, model("birnn:4", 2), &task.train, &task.heldout, &task.den).unwrap())
    };
    let (m1, a) = run(1);
    let (m2, b) = run(1);
    let (m4, c) = run(4);
    let lines = |m: &[ctccrf::acoustic::EpochMetrics]| m.iter().map(format_metrics).collect::<Vec<_>>();
    assert_eq!(lines(&a), lines(&b));
    assert_eq!(lines(&a), lines(&c));
    assert_eq!(m1, m2);
    assert_eq!(m1, m4);
    assert_eq!(encode_checkpoint(&m1), encode_checkpoint(&m4));
}

#[test]
fn checkpoint_of_a_trained_model_reloads() {
    let task = small_task(16, 4);
    let config = TrainConfig {
        epochs: 2,
        ..Default::default()
    };
    let (m, _) = train(&config, model("affine:8,tanh,rnn:4", 0), &task.train, &task.heldout, &task.den).unwrap();
    let bytes = encode_checkpoint(&m);
    let back = decode_checkpoint(&bytes).unwrap();
    assert_eq!(encode_checkpoint(&back), bytes);
    let x = &task.heldout[0].features;
    let (p, q) = (m.forward(x).unwrap(), back.forward(x).unwrap());
    for (a, b) in p.matrix().as_slice().iter().zip(q.matrix().as_slice()) {
        assert!((a - b).abs() < 1e-4);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let task = small_task(4, 0);
    for config in [
        TrainConfig { epochs: 0, ..Default::default() },
        TrainConfig { batch_size: 0, ..Default::default() },
        TrainConfig { learning_rate: -1.0, ..Default::default() },
        TrainConfig { dropout: 1.0, ..Default::default() },
    ] {
        let r = train(&config, model("tanh", 0), &task.train, &task.heldout, &task.den);
        assert!(matches!(r, Err(Error::Config(_))), "{config:?}");
    }
}
