//! Experiment orchestration: configuration files, synthetic houses, single
//! model runs, AutoML runs over the default search space, trial logs and
//! reports.
//!
//! The test split is wrapped in [`audit::TestSplit`]; every read is
//! recorded, and AutoML only opens it once, for the final evaluation of
//! the refit best configuration.

pub mod audit;
pub mod automl;
pub mod config;
pub mod data;
pub mod families;
pub mod kv;
pub mod log;
pub mod report;
pub mod single;
pub mod synth;

pub use audit::{Splits, TestSplit};
pub use automl::{run_automl, AutomlOutcome};
pub use config::{DataSource, ExperimentConfig, Mode};
pub use families::{default_params, fit_family, TrainingSettings};
pub use log::{history_from_records, replay_log, ReplayError, TrialLogRecord};
pub use report::emit_report;
pub use single::{run_single, SingleOutcome};
pub use synth::{generate_synthetic, SyntheticAppliance, SyntheticHouseSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    /// Bad configuration or command-line input.
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Runtime(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunnerError {
    /// Process exit code: 1 for configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<nilm_core::Error> for RunnerError {
    fn from(e: nilm_core::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type Result<T, E = RunnerError> = std::result::Result<T, E>;
