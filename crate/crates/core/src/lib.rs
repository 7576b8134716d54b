//! CTC-CRF sequence training engine.
//!
//! The crate builds the denominator graph (CTC topology composed with a
//! label n-gram LM), evaluates the CTC-CRF objective and its gradient by
//! log-domain forward-backward, trains a small acoustic model on top of it,
//! and decodes with a WFST beam search that can skip blank frames.

pub mod acoustic;
pub mod crfloss;
pub mod decoder;
mod error;
pub mod gradcheck;
pub mod io;
pub mod lm;
pub mod matrix;
pub mod numeric;
mod semiring;
pub mod symbols;
pub mod synthetic;
pub mod wfst;

pub use crate::crfloss::{
    batch_crf_loss, crf_loss, denominator_forward, flatten_denominator, numerator_forward,
    BatchResult, DenominatorTable, LossResult, PosteriorMatrix,
};
pub use crate::error::{Error, Result};
pub use crate::lm::NGramModel;
pub use crate::matrix::Matrix;
pub use crate::semiring::Semiring;
pub use crate::symbols::{Alphabet, SymbolTable};
pub use crate::wfst::Wfst;
