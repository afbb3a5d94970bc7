//! Sequential model-based hyperparameter optimization.
//!
//! A [`SearchSpace`] is a tree: choosing an option of a [`ParamSpec::Choice`]
//! activates that option's nested parameters. Configurations are flat maps
//! from path keys (`"model"`, `"seq2point.window_size"`, ...) to values.
//! [`tpe_suggest`] proposes the next configuration from the trial history
//! with tree-structured Parzen estimators; [`run_optimization`] drives the
//! loop.

mod defaults;
mod parzen;
mod space;
mod tpe;
mod trials;

pub use defaults::{benchmark_loss, default_space, neural_space, LEARNING_RATES};
pub use parzen::{CategoricalParzen, ContinuousParzen, Parzen};
pub use space::{ChoiceOption, Configuration, ParamSpec, SearchSpace, Value};
pub use tpe::{split_good_bad, tpe_suggest, TpeConfig};
pub use trials::{best_trial, run_optimization, Algorithm, Outcome, Trial, TrialStatus};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HpoError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("`{key}` = {value} is outside its domain")]
    OutOfDomain { key: String, value: String },

    #[error("no completed trials")]
    EmptyHistory,

    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),

    #[error("invalid optimizer setting: {0}")]
    InvalidSetting(String),
}

pub type Result<T, E = HpoError> = std::result::Result<T, E>;
