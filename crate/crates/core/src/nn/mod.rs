//! Minimal CNN engine: 4-D tensors, the layer kinds the benchmark models
//! need, softmax cross-entropy, and Adam.
//!
//! Layers are plain functions (`*_forward` / `*_backward`) so each can be
//! gradient-checked in isolation; [`Network`] strings them together and
//! owns parameters, gradients, and optimizer state.

mod adam;
mod conv;
pub mod gradcheck;
mod init;
mod kernels;
mod layers;
mod loss;
mod network;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_len, Conv2dGrads, KERNEL, PADDING};
pub use init::{he_uniform, he_uniform_bound};
pub use layers::{
    dense_backward, dense_forward, flatten, maxpool2_backward, maxpool2_forward, relu_backward,
    relu_forward, DenseGrads,
};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use network::{infer_shape, spec_param_count, LayerSpec, Network, Param, SampleShape};
pub use tensor::Tensor4;

use thiserror::Error;

use crate::supool::PoolError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("max pooling needs even spatial dims, got {h}x{w}")]
    OddSpatial { h: usize, w: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),

    #[error("backward called without a matching training forward pass")]
    MissingForwardCache,

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Pool(#[from] PoolError),
}

pub type Result<T> = std::result::Result<T, NnError>;
