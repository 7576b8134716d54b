//! A small trainable acoustic model and the CTC-CRF training loop.

mod checkpoint;
mod model;
mod optim;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint};
pub use model::{ForwardCache, LayerSpec, ModelParams, ParamGrads};
pub use optim::Optimizer;
pub use train::{
    format_metrics, train, train_with, utterance_gradient, EpochMetrics, Example, TrainConfig,
};
