//! Differentiable building blocks with hand-written backward passes.
//!
//! Layers cache what their backward pass needs in an explicit value returned
//! from `forward`; gradients accumulate into [`Param::grad`]. All arithmetic
//! is `f64`.

mod adamw;
mod gradcheck;
mod layers;
mod lstm;
mod param;
mod rng;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use gradcheck::{grad_check, max_relative_error, numerical_gradient};
pub use layers::{
    dropout, dropout_backward, leaky_relu, leaky_relu_backward, sigmoid, sigmoid_backward, LayerNorm, LayerNormCache,
    Linear, DEFAULT_LEAKY_SLOPE, LAYER_NORM_EPS,
};
pub use lstm::{BiLstm, BiLstmCache, LstmDirection};
pub(crate) use param::prefixed;
pub use param::{Param, Parameters};
pub use rng::{RngState, SeededRng};

use ndarray::Array3;
use thiserror::Error;

/// (batch, timesteps, features).
pub type SequenceBatch = Array3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: expected {expected}, found {found}")]
    ShapeMismatch { op: &'static str, expected: String, found: String },
}

impl NnError {
    pub(crate) fn shape(op: &'static str, expected: impl std::fmt::Debug, found: impl std::fmt::Debug) -> Self {
        NnError::ShapeMismatch { op, expected: format!("{expected:?}"), found: format!("{found:?}") }
    }
}

/// Dropout is active only in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
