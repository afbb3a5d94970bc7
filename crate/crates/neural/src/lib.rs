//! The seven neural disaggregation families.
//!
//! | family       | input window         | output                         |
//! |--------------|----------------------|--------------------------------|
//! | `fcnn`       | centred              | midpoint                       |
//! | `dae`        | centred              | whole window, overlap-averaged |
//! | `rnn_gru`    | trailing             | last sample                    |
//! | `lstm`       | trailing             | last sample                    |
//! | `window_gru` | trailing             | last sample                    |
//! | `seq2point`  | centred              | midpoint                       |
//! | `seq2seq`    | centred              | whole window, overlap-averaged |
//!
//! Each network predicts one appliance; [`NeuralDisaggregator`] holds one
//! network per target.

mod model;
mod network;
mod overlap;
mod spec;
mod train;

pub use model::NeuralDisaggregator;
pub use network::{build_network, Network, OutputKind, WindowAlignment};
pub use overlap::overlap_average;
pub use spec::NetworkSpec;
pub use train::{train, TrainingHistory};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("empty training split")]
    EmptyTraining,

    #[error("unknown target appliance `{0}`")]
    UnknownTarget(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("network has no standardization parameters (not trained)")]
    MissingScaler,

    #[error("output index {0} is not covered by any window")]
    Uncovered(usize),

    #[error("network file: {0}")]
    Format(String),

    #[error(transparent)]
    Nn(#[from] nilm_nn::NnError),

    #[error(transparent)]
    Core(#[from] nilm_core::Error),
}

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;
