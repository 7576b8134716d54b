use rayon::prelude::*;

use super::{denominator_forward, numerator_forward, DenominatorTable, PosteriorMatrix};
use crate::error::Result;
use crate::matrix::Matrix;

/// CTC-CRF loss of one utterance, in the maximization convention.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    /// `(numerator - denominator) + alpha * ctc`.
    pub objective: f64,
    /// d objective / d posterior, `frames × |S_π|`.
    pub grad: Matrix,
    /// `log_pl + log Σ_{π ∈ B⁻¹(l)} exp(node potentials)`.
    pub numerator: f64,
    pub denominator: f64,
    /// Plain CTC log-likelihood (numerator without `log_pl`).
    pub ctc: f64,
    /// Numerator or denominator has no path; the gradient is zero.
    pub degenerate: bool,
}

impl LossResult {
    pub fn frames(&self) -> usize {
        self.grad.rows()
    }
}

/// One training example for [`batch_crf_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub posterior: PosteriorMatrix,
    pub labels: Vec<usize>,
    pub log_pl: f64,
}

/// CTC-CRF objective and gradient for one utterance.
///
/// The gradient is `occ_num - occ_den + alpha * occ_ctc`; the numerator and
/// CTC occupancies coincide because `log_pl` is a constant.
pub fn crf_loss(
    posterior: &PosteriorMatrix,
    labels: &[usize],
    log_pl: f64,
    den: &DenominatorTable,
    alpha: f64,
) -> Result<LossResult> {
    let num = numerator_forward(posterior, labels, log_pl)?;
    let den_fb = denominator_forward(posterior, den)?;
    let ctc = num.score - log_pl;
    if !num.feasible || !den_fb.feasible {
        return Ok(LossResult {
            objective: f64::NEG_INFINITY,
            grad: Matrix::zeros(posterior.frames(), posterior.width()),
            numerator: num.score,
            denominator: den_fb.score,
            ctc: if num.feasible { ctc } else { f64::NEG_INFINITY },
            degenerate: true,
        });
    }
    let mut grad = num.occupancy;
    grad.scale(1.0 + alpha);
    grad.axpy(-1.0, &den_fb.occupancy);
    let crf = num.score - den_fb.score;
    Ok(LossResult {
        objective: if alpha == 0.0 { crf } else { crf + alpha * ctc },
        grad,
        numerator: num.score,
        denominator: den_fb.score,
        ctc,
        degenerate: false,
    })
}

#[derive(Debug)]
pub struct BatchResult {
    /// Per-utterance results in input order.
    pub results: Vec<Result<LossResult>>,
    /// Σ objective / Σ frames over the usable utterances.
    pub frame_normalized_objective: f64,
    pub frames: usize,
    pub degenerate: usize,
    pub failed: usize,
}

/// Runs [`crf_loss`] for every utterance on the current rayon pool. Each
/// utterance is processed at its own length; results and the aggregate are
/// ordered by input index, so the output does not depend on scheduling.
pub fn batch_crf_loss(batch: &[Utterance], den: &DenominatorTable, alpha: f64) -> BatchResult {
    let results: Vec<Result<LossResult>> = batch
        .par_iter()
        .map(|u| crf_loss(&u.posterior, &u.labels, u.log_pl, den, alpha))
        .collect();
    let mut objective = 0.0;
    let mut frames = 0;
    let mut degenerate = 0;
    let mut failed = 0;
    for r in &results {
        match r {
            Ok(r) if r.degenerate => degenerate += 1,
            Ok(r) => {
                objective += r.objective;
                frames += r.frames();
            }
            Err(_) => failed += 1,
        }
    }
    BatchResult {
        frame_normalized_objective: if frames > 0 {
            objective / frames as f64
        } else {
            0.0
        },
        results,
        frames,
        degenerate,
        failed,
    }
}
