//! Minimal tensor kernel with reverse-mode differentiation.
//!
//! A forward pass records operations on a [`Tape`]; [`Tape::backward`]
//! walks the recording once in reverse and returns one gradient tensor per
//! entry of the [`ParamStore`]. Layers own only [`ParamId`]s, so the same
//! store can be evaluated on any number of tapes.

mod gradcheck;
mod layers;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, max_relative_error, numeric_gradients, GradCheckReport};
pub use layers::{Activation, Conv1d, ConvPadding, Dense, Dropout, GruCell, LstmCell};
pub use optim::{clip_global_norm, Optimizer, OptimizerKind, BETA1, BETA2, EPSILON};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{LossKind, Tape, Var};
pub use tensor::{gemm, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("{0}: non-finite value")]
    NonFinite(&'static str),

    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("variable belongs to a different tape")]
    DetachedTape,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter file: {0}")]
    Format(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
