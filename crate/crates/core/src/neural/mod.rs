//! From-scratch differentiable edge classifier.
//!
//! An attention-based graph encoder (two layers, interleaved node and edge
//! updates) feeds a three-layer MLP decoder that emits one logit per
//! directed edge. Forward, reverse-mode gradients, the Adam optimizer, and
//! the training loop are all implemented here in plain `f64`; gradients are
//! verified against central finite differences in [`gradcheck`].

mod forward;
mod gradcheck;
mod loss;
mod model;
mod optim;
mod tensor;
mod train;

pub use forward::{ForwardPass, backward, decode, encoder_step, forward, loss_and_grads, predict};
pub use gradcheck::grad_check;
pub use loss::{bce_with_logits, bce_with_logits_backward};
pub use model::{
    DECODER_LAYERS, DEFAULT_HIDDEN_DIM, ENCODER_LAYERS, EdgeClassifierModel, GatLayer,
    LinearLayer, ModelGrads, xavier_uniform,
};
pub use optim::Adam;
pub use tensor::Tensor;
pub use train::{EpochMetrics, TrainConfig, TrainReport, train};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("tensor data length {len} does not match shape {shape:?}")]
    BadTensor { shape: Vec<usize>, len: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("graph {0} carries no labels for training")]
    MissingLabels(usize),
    #[error("non-finite loss or gradient at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}
