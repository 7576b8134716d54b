use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{ModelParams, ParamGrads};
use super::optim::{Optimizer, OptimizerState};
use crate::crfloss::{crf_loss, DenominatorTable};
use crate::decoder::{evaluate_error_rate, greedy_decode_states};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the auxiliary CTC term.
    pub alpha: f64,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.1,
            learning_rate: 0.01,
            optimizer: Optimizer::default(),
            epochs: 50,
            batch_size: 8,
            seed: 0,
            clip_norm: Some(5.0),
            dropout: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if !(self.learning_rate >= 0.0) {
            return bad("learning rate must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip norm must be positive");
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return bad("invalid Adam hyperparameters");
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// Features with their label state ids and precomputed `log p(l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub log_pl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Frame-normalized training objective, CRF plus weighted CTC.
    pub objective: f64,
    /// Greedy token error rate on the held-out set.
    pub token_error: f64,
}

/// One metrics-log line: `epoch<TAB>objective<TAB>token_error`.
pub fn format_metrics(m: &EpochMetrics) -> String {
    format!("{}\t{:?}\t{:?}", m.epoch, m.objective, m.token_error)
}

/// Objective and parameter gradient of one utterance, scaled by
/// `1 / frames`. The gradient points uphill. `None` for degenerate
/// utterances.
pub fn utterance_gradient(
    model: &ModelParams,
    example: &Example,
    den: &DenominatorTable,
    alpha: f64,
    dropout_seed: Option<u64>,
) -> Result<Option<(f64, ParamGrads)>> {
    let (post, cache) = model.forward_cached(&example.features, dropout_seed)?;
    let loss = crf_loss(&post, &example.labels, example.log_pl, den, alpha)?;
    if loss.degenerate {
        return Ok(None);
    }
    let frames = example.features.rows() as f64;
    let mut upstream = loss.grad;
    upstream.scale(1.0 / frames);
    let grads = model.backward_cached(&cache, &upstream)?;
    Ok(Some((loss.objective / frames, grads)))
}

/// Greedy token error rate of `model` on `examples`.
pub fn greedy_token_error(model: &ModelParams, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let hyps: Vec<Vec<usize>> = examples
        .par_iter()
        .map(|e| model.forward(&e.features).map(|p| greedy_decode_states(&p)))
        .collect::<Result<_>>()?;
    let refs: Vec<Vec<usize>> = examples.iter().map(|e| e.labels.clone()).collect();
    Ok(evaluate_error_rate(&hyps, &refs)?.rate())
}

pub fn train(
    config: &TrainConfig,
    model: ModelParams,
    train_set: &[Example],
    heldout: &[Example],
    den: &DenominatorTable,
) -> Result<(ModelParams, Vec<EpochMetrics>)> {
    train_with(config, model, train_set, heldout, den, |_, _| Ok(()))
}

/// Maximizes the mean frame-normalized objective over `train_set`.
///
/// Utterance gradients inside a mini-batch are computed on the current
/// rayon pool and reduced in utterance order, so a fixed seed gives the
/// same run for any pool size. `on_epoch` sees the metrics and parameters
/// after every epoch. A non-finite objective or gradient aborts with
/// [`Error::Diverged`] carrying the last good parameters.
pub fn train_with(
    config: &TrainConfig,
    mut model: ModelParams,
    train_set: &[Example],
    heldout: &[Example],
    den: &DenominatorTable,
    mut on_epoch: impl FnMut(&EpochMetrics, &ModelParams) -> Result<()>,
) -> Result<(ModelParams, Vec<EpochMetrics>)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    model.set_dropout(config.dropout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = OptimizerState::new(config.optimizer, &model);
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        let last_good = model.clone();
        let diverged = |model: ModelParams| Error::Diverged {
            epoch,
            last_good: Box::new(model),
        };
        order.shuffle(&mut rng);
        let mut objective = 0.0;
        let mut frames = 0usize;
        for batch in order.chunks(config.batch_size) {
            let per_utt: Vec<Result<Option<(f64, ParamGrads)>>> = batch
                .par_iter()
                .map(|&i| {
                    let dropout_seed = (config.dropout > 0.0).then(|| {
                        config.seed ^ ((epoch as u64) << 32) ^ (i as u64).wrapping_mul(0x9E37_79B9)
                    });
                    utterance_gradient(&model, &train_set[i], den, config.alpha, dropout_seed)
                })
                .collect();
            let mut total = ParamGrads::zeros_like(&model);
            let mut used = 0usize;
            for (&i, r) in batch.iter().zip(per_utt) {
                if let Some((obj, g)) = r? {
                    let t = train_set[i].features.rows();
                    objective += obj * t as f64;
                    frames += t;
                    total.add_scaled(1.0, &g);
                    used += 1;
                }
            }
            if used == 0 {
                continue;
            }
            // minimize the negated batch mean
            total.scale(-1.0 / used as f64);
            if !total.is_finite() {
                return Err(diverged(last_good));
            }
            if let Some(clip) = config.clip_norm {
                let norm = total.norm();
                if norm > clip {
                    total.scale(clip / norm);
                }
            }
            optimizer.step(&mut model, &total, config.learning_rate);
        }
        if frames == 0 {
            return Err(Error::Config("every training utterance is degenerate".into()));
        }
        let objective = objective / frames as f64;
        if !objective.is_finite() {
            return Err(diverged(last_good));
        }
        let m = EpochMetrics {
            epoch,
            objective,
            token_error: greedy_token_error(&model, heldout)?,
        };
        on_epoch(&m, &model)?;
        metrics.push(m);
    }
    Ok((model, metrics))
}
