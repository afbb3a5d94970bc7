//! State-based disaggregation.
//!
//! Each appliance is modelled as a small set of power levels learned by 1-D
//! k-means ([`learn_states`]). Combinatorial optimization ([`co_disaggregate`])
//! picks, independently per time step, the joint state whose level sum is
//! closest to the aggregate. The factorial HMM ([`fhmm_disaggregate`]) adds
//! per-appliance Markov dynamics and decodes the joint chain exactly with
//! Viterbi.

mod co;
mod fhmm;
mod joint;
mod model;
mod states;

pub use co::{co_disaggregate, co_states, DEFAULT_CO_CAP};
pub use fhmm::{fhmm_decode, fhmm_disaggregate, fit_fhmm, path_log_prob, DEFAULT_VITERBI_CAP, EMISSION_STD_FLOOR};
pub use joint::JointStateIndex;
pub use model::{fit_levels, CoModel, FhmmModel};
pub use states::{assign_states, learn_states, ApplianceStateModel, HmmParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassicError {
    #[error("`{label}` has {distinct} distinct values, fewer distinct values than k = {k}")]
    FewerDistinct { label: String, distinct: usize, k: usize },

    #[error("k must be >= 2, got {0}")]
    InvalidK(usize),

    #[error("{states} joint states exceed the cap of {cap}")]
    CapExceeded { states: usize, cap: usize },

    #[error("non-finite log-probability at t = {0}")]
    NonFinite(usize),

    #[error("aggregate contains gaps")]
    Gaps,

    #[error("invalid state model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Core(#[from] nilm_core::Error),
}

pub type Result<T, E = ClassicError> = std::result::Result<T, E>;
