//! CART regression trees and bagged forests for disaggregation.
//!
//! Inputs are lag windows of the aggregate ([`build_lag_features`]); each
//! target appliance gets its own tree or forest.

mod cart;
mod features;
mod forest;
mod model;

pub use cart::{fit_cart, split_gain, CartParams, Criterion, Tree, TreeNode};
pub use features::{build_lag_features, Matrix};
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use model::{TreeDisaggregator, TreeEnsemble, DEFAULT_LAG};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("lag must be >= 1")]
    InvalidLag,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },

    #[error("n_estimators must be >= 1")]
    NoEstimators,

    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Core(#[from] nilm_core::Error),
}

pub type Result<T, E = TreeError> = std::result::Result<T, E>;
