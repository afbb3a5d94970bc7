//! The contract shared by every disaggregation algorithm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::series::PowerSeries;

pub type ModelError = Box<dyn std::error::Error + Send + Sync>;

/// The eleven supported model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Dt,
    Rf,
    Fcnn,
    RnnGru,
    WindowGru,
    Seq2seq,
    Seq2point,
    Lstm,
    Dae,
    Fhmm,
    Co,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Dt,
        Family::Rf,
        Family::Fcnn,
        Family::RnnGru,
        Family::WindowGru,
        Family::Seq2seq,
        Family::Seq2point,
        Family::Lstm,
        Family::Dae,
        Family::Fhmm,
        Family::Co,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Dt => "dt",
            Family::Rf => "rf",
            Family::Fcnn => "fcnn",
            Family::RnnGru => "rnn_gru",
            Family::WindowGru => "window_gru",
            Family::Seq2seq => "seq2seq",
            Family::Seq2point => "seq2point",
            Family::Lstm => "lstm",
            Family::Dae => "dae",
            Family::Fhmm => "fhmm",
            Family::Co => "co",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(
            self,
            Family::Fcnn
                | Family::RnnGru
                | Family::WindowGru
                | Family::Seq2seq
                | Family::Seq2point
                | Family::Lstm
                | Family::Dae
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFamily(pub String);

impl fmt::Display for UnknownFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown model family `{}`", self.0)
    }
}

impl std::error::Error for UnknownFamily {}

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| UnknownFamily(s.to_string()))
    }
}

/// A fitted model. Fitting is family-specific (each family has its own
/// typed hyperparameters); prediction is uniform.
///
/// `predict` returns one series per target appliance, on the grid of the
/// input aggregate, with every value >= 0.
pub trait Disaggregator: Send + Sync {
    fn family(&self) -> Family;

    fn targets(&self) -> &[String];

    fn predict(&self, aggregate: &PowerSeries) -> Result<Vec<PowerSeries>, ModelError>;
}

/// Clamps to >= 0 and wraps as a series on the grid of `like`.
pub fn output_series(like: &PowerSeries, label: &str, values: Vec<f64>) -> crate::Result<PowerSeries> {
    let values = values.into_iter().map(|v| v.max(0.0)).collect();
    PowerSeries::new(label, like.start_time(), like.period(), values)
}
