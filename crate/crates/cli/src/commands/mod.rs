mod decode;
mod graphs;
mod prepare;
mod synth;
mod train;

pub use decode::{decode, score};
pub use graphs::build_graphs;
pub use prepare::prepare;
pub use synth::{lm_train, synth};
pub use train::{gradcheck, train};
