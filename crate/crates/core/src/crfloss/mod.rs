//! The CTC-CRF objective.
//!
//! Node potentials are log-softmax outputs of the acoustic model, one row
//! per frame over S_π. The objective of an utterance is
//!
//! ```text
//! log Σ_{π ∈ B⁻¹(l)} exp(φ(π)) - log Σ_{π'} exp(φ(π'))
//! φ(π) = log p(B(π)) + Σ_t log p(π_t | x)
//! ```
//!
//! The numerator runs CTC forward-backward over the label lattice (the
//! `log p(l)` term is a precomputed constant); the denominator runs
//! forward-backward over the flattened denominator graph. Gradients with
//! respect to the node potentials are the difference of the two occupancy
//! matrices.

mod denominator;
mod loss;
mod numerator;

pub use denominator::{denominator_forward, flatten_denominator, DenArc, DenominatorTable};
pub use loss::{batch_crf_loss, crf_loss, BatchResult, LossResult, Utterance};
pub use numerator::numerator_forward;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::log_sum_exp;

/// Per-frame log-probabilities over S_π (column 0 is blank).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix(Matrix);

impl PosteriorMatrix {
    /// Wraps a `frames × |S_π|` matrix. Rejects NaN; `-inf` is allowed.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.as_slice().iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Shape("posterior contains NaN or +inf".into()));
        }
        if values.cols() < 2 {
            return Err(Error::Shape("posterior needs blank plus at least one label".into()));
        }
        Ok(PosteriorMatrix(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Every entry `-ln(width)`.
    pub fn uniform(frames: usize, width: usize) -> Self {
        PosteriorMatrix(Matrix::filled(frames, width, -(width as f64).ln()))
    }

    pub fn frames(&self) -> usize {
        self.0.rows()
    }

    pub fn width(&self) -> usize {
        self.0.cols()
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.0.get(t, s)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.0.row(t)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Largest deviation of a row's log-sum-exp from 0.
    pub fn max_normalization_error(&self) -> f64 {
        self.0
            .iter_rows()
            .map(|r| log_sum_exp(r).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_log_softmax(&self, tol: f64) -> bool {
        self.max_normalization_error() <= tol
    }
}

/// Score and per-frame symbol occupancies of one forward-backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBackward {
    pub score: f64,
    /// `frames × |S_π|`; rows sum to 1 when the score is finite.
    pub occupancy: Matrix,
    /// False when no path of the required length exists.
    pub feasible: bool,
}

impl ForwardBackward {
    fn infeasible(frames: usize, width: usize) -> Self {
        ForwardBackward {
            score: f64::NEG_INFINITY,
            occupancy: Matrix::zeros(frames, width),
            feasible: false,
        }
    }
}
