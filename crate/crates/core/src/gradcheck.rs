//! Randomized self-checks of the loss: brute-force path enumeration against
//! forward-backward, and central finite differences against the analytic
//! gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acoustic::{utterance_gradient, Example, LayerSpec, ModelParams, ParamGrads};
use crate::crfloss::{
    crf_loss, denominator_forward, flatten_denominator, numerator_forward, DenominatorTable,
    PosteriorMatrix,
};
use crate::error::{Error, Result};
use crate::lm::{estimate_with_vocabulary, NGramModel};
use crate::matrix::Matrix;
use crate::numeric::{log_add, relative_error};
use crate::symbols::Alphabet;
use crate::synthetic::{generate_toy, random_posteriors, toy_label_names, ToyConfig, ToyTask};
use crate::wfst::{build_denominator_graph, map_b};

/// Floor on the magnitude used to turn gradient differences into relative
/// errors, so entries that are essentially zero are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub trials: usize,
    pub frames: usize,
    pub num_labels: usize,
    pub lm_order: usize,
    pub alpha: f64,
    pub step: f64,
    pub tolerance: f64,
    pub oracle_tolerance: f64,
    /// Layers of the model used for the end-to-end check; `None` skips it.
    pub model_layers: Option<String>,
    pub model_tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            trials: 100,
            frames: 3,
            num_labels: 2,
            lm_order: 2,
            alpha: 0.1,
            step: 1e-4,
            tolerance: 1e-4,
            oracle_tolerance: 1e-9,
            model_layers: Some("affine:6,tanh,birnn:4".into()),
            model_tolerance: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub max_grad_error: f64,
    pub max_oracle_error: f64,
    pub tolerance: f64,
    pub oracle_tolerance: f64,
    pub model_parameters: usize,
    pub max_model_error: f64,
    pub model_tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_grad_error <= self.tolerance
            && self.max_oracle_error <= self.oracle_tolerance
            && self.max_model_error <= self.model_tolerance
    }

    pub fn render(&self) -> String {
        let mut line = format!(
            "{}\ttrials={}\tmax_grad_rel_error={:.3e}\ttolerance={:e}\tmax_oracle_abs_error={:.3e}\toracle_tolerance={:e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.trials,
            self.max_grad_error,
            self.tolerance,
            self.max_oracle_error,
            self.oracle_tolerance
        );
        if self.model_parameters > 0 {
            line += &format!(
                "\tmodel_parameters={}\tmax_model_rel_error={:.3e}\tmodel_tolerance={:e}",
                self.model_parameters, self.max_model_error, self.model_tolerance
            );
        }
        line
    }
}

/// Random label LM over the whole alphabet, estimated from a short random
/// corpus with a random discount.
pub fn random_label_lm<R: Rng>(alphabet: &Alphabet, order: usize, rng: &mut R) -> Result<NGramModel> {
    let n = alphabet.num_labels();
    let corpus: Vec<Vec<&str>> = (0..rng.gen_range(2..=6))
        .map(|_| {
            (0..rng.gen_range(1..=4))
                .map(|_| alphabet.labels()[rng.gen_range(0..n)].as_str())
                .collect()
        })
        .collect();
    let discount = rng.gen_range(0.1..0.9);
    estimate_with_vocabulary(&corpus, order, discount, alphabet.labels())
}

/// Sequence log-probability of label state ids under a label LM.
pub fn label_log_prob(lm: &NGramModel, alphabet: &Alphabet, labels: &[usize]) -> Result<f64> {
    lm.score_sequence(&alphabet.decode(labels))
}

/// Numerator and denominator log-scores by enumerating every state sequence
/// of the posterior's length.
pub fn brute_force_scores(
    posterior: &PosteriorMatrix,
    labels: &[usize],
    log_pl: f64,
    lm: &NGramModel,
    alphabet: &Alphabet,
) -> Result<(f64, f64)> {
    let (frames, width) = (posterior.frames(), posterior.width());
    if width != alphabet.num_states() {
        return Err(Error::Shape("posterior width differs from the alphabet".into()));
    }
    let total = width
        .checked_pow(frames as u32)
        .filter(|&n| n <= 1 << 24)
        .ok_or_else(|| Error::Config(format!("{width}^{frames} sequences is too many to enumerate")))?;
    let mut num = f64::NEG_INFINITY;
    let mut den = f64::NEG_INFINITY;
    let mut pi = vec![0usize; frames];
    for mut code in 0..total {
        let mut acoustic = 0.0;
        for t in 0..frames {
            pi[t] = code % width;
            code /= width;
            acoustic += posterior.get(t, pi[t]);
        }
        let collapsed = map_b(&pi, alphabet)?;
        if collapsed == labels {
            num = log_add(num, acoustic + log_pl);
        }
        den = log_add(den, acoustic + label_log_prob(lm, alphabet, &collapsed)?);
    }
    Ok((num, den))
}

/// Central finite differences of the objective with respect to every node
/// potential; degenerate perturbations yield `None`.
pub fn finite_difference_grad(
    posterior: &PosteriorMatrix,
    labels: &[usize],
    log_pl: f64,
    den: &DenominatorTable,
    alpha: f64,
    step: f64,
) -> Result<Option<Matrix>> {
    let (frames, width) = (posterior.frames(), posterior.width());
    let mut out = Matrix::zeros(frames, width);
    for t in 0..frames {
        for s in 0..width {
            let eval = |delta: f64| -> Result<Option<f64>> {
                let mut m = posterior.matrix().clone();
                m.add_at(t, s, delta);
                let r = crf_loss(&PosteriorMatrix::new(m)?, labels, log_pl, den, alpha)?;
                Ok((!r.degenerate).then_some(r.objective))
            };
            match (eval(step)?, eval(-step)?) {
                (Some(plus), Some(minus)) => out.set(t, s, (plus - minus) / (2.0 * step)),
                _ => return Ok(None),
            }
        }
    }
    Ok(Some(out))
}

/// Largest floored relative error between two equally shaped matrices.
pub fn max_relative_error(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| relative_error(x, y, RELATIVE_FLOOR))
        .fold(0.0, f64::max)
}

/// Sum of the frame-normalized objectives of `examples`, skipping
/// degenerate ones, and its analytic parameter gradient.
pub fn model_objective(
    model: &ModelParams,
    examples: &[Example],
    den: &DenominatorTable,
    alpha: f64,
) -> Result<(f64, ParamGrads)> {
    let mut total = 0.0;
    let mut grads = ParamGrads::zeros_like(model);
    for e in examples {
        if let Some((obj, g)) = utterance_gradient(model, e, den, alpha, None)? {
            total += obj;
            grads.add_scaled(1.0, &g);
        }
    }
    Ok((total, grads))
}

/// Largest floored relative error between the analytic gradient of
/// [`model_objective`] and central finite differences over every parameter.
pub fn model_gradient_error(
    model: &ModelParams,
    examples: &[Example],
    den: &DenominatorTable,
    alpha: f64,
    step: f64,
) -> Result<f64> {
    let (_, analytic) = model_objective(model, examples, den, alpha)?;
    let mut worst: f64 = 0.0;
    for (i, tensor) in analytic.0.iter().enumerate() {
        for (j, &g) in tensor.iter().enumerate() {
            let eval = |delta: f64| -> Result<f64> {
                let mut m = model.clone();
                m.tensors_mut()[i][j] += delta;
                Ok(model_objective(&m, examples, den, alpha)?.0)
            };
            let fd = (eval(step)? - eval(-step)?) / (2.0 * step);
            let err = relative_error(g, fd, RELATIVE_FLOOR);
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        }
    }
    Ok(worst)
}

/// Labels of length 1-2 that fit into `frames` frames.
fn random_labels<R: Rng>(num_labels: usize, frames: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let len = rng.gen_range(1..=2.min(frames));
        let labels: Vec<usize> = (0..len).map(|_| rng.gen_range(1..=num_labels)).collect();
        let repeats = labels.windows(2).filter(|w| w[0] == w[1]).count();
        if labels.len() + repeats <= frames {
            return labels;
        }
    }
}

pub fn run_gradcheck(config: &GradCheckConfig) -> Result<GradCheckReport> {
    if config.trials == 0 || config.frames == 0 || config.num_labels == 0 {
        return Err(Error::Config("gradcheck needs trials, frames and labels > 0".into()));
    }
    if !(config.step > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let alphabet = Alphabet::new(toy_label_names(config.num_labels))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = GradCheckReport {
        trials: config.trials,
        max_grad_error: 0.0,
        max_oracle_error: 0.0,
        tolerance: config.tolerance,
        oracle_tolerance: config.oracle_tolerance,
        model_parameters: 0,
        max_model_error: 0.0,
        model_tolerance: config.model_tolerance,
    };
    for _ in 0..config.trials {
        let lm = random_label_lm(&alphabet, config.lm_order, &mut rng)?;
        let den = flatten_denominator(&build_denominator_graph(&alphabet, &lm)?)?;
        let post = random_posteriors(config.frames, alphabet.num_states(), &mut rng)?;
        let labels = random_labels(config.num_labels, config.frames, &mut rng);
        let log_pl = label_log_prob(&lm, &alphabet, &labels)?;

        let (bf_num, bf_den) = brute_force_scores(&post, &labels, log_pl, &lm, &alphabet)?;
        let num = numerator_forward(&post, &labels, log_pl)?.score;
        let den_score = denominator_forward(&post, &den)?.score;
        let oracle = (num - bf_num).abs().max((den_score - bf_den).abs());
        report.max_oracle_error = report.max_oracle_error.max(if oracle.is_nan() {
            f64::INFINITY
        } else {
            oracle
        });

        let loss = crf_loss(&post, &labels, log_pl, &den, config.alpha)?;
        let fd = finite_difference_grad(&post, &labels, log_pl, &den, config.alpha, config.step)?;
        let err = match (loss.degenerate, fd) {
            (false, Some(fd)) => max_relative_error(&loss.grad, &fd),
            _ => f64::INFINITY,
        };
        report.max_grad_error = report.max_grad_error.max(if err.is_nan() { f64::INFINITY } else { err });
    }

    if let Some(layers) = &config.model_layers {
        let data = generate_toy(&ToyConfig {
            train: 4,
            heldout: 0,
            seed: config.seed,
            ..Default::default()
        })?;
        let task = ToyTask::new(&data, 2)?;
        let specs = LayerSpec::parse_list(layers)?;
        let dim = data.train[0].features.cols();
        let model = ModelParams::new(dim, &specs, data.alphabet.num_states(), config.seed)?;
        report.model_parameters = model.num_parameters();
        report.max_model_error =
            model_gradient_error(&model, &task.train, &task.den, config.alpha, config.step)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_passes() {
        let report = run_gradcheck(&GradCheckConfig {
            trials: 10,
            ..Default::default()
        })
        .unwrap();
        assert!(report.passed(), "{}", report.render());
        assert!(report.render().starts_with("PASS"));
    }

    #[test]
    fn impossible_tolerance_fails() {
        let report = run_gradcheck(&GradCheckConfig {
            trials: 3,
            tolerance: 1e-12,
            ..Default::default()
        })
        .unwrap();
        assert!(!report.passed());
        assert!(report.render().starts_with("FAIL"));
    }
}
