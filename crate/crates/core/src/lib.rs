//! Core data model for non-intrusive load monitoring.
//!
//! A [`PowerSeries`] is one channel of watt readings on an implicit uniform
//! grid. Channels are resampled, aligned into an [`AlignedDataset`] and split
//! by date into train / validation / test ranges. The [`metrics`] module
//! holds the two evaluation measures used throughout the workspace, and
//! [`model`] defines the contract every disaggregation algorithm satisfies.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod normalize;
pub mod series;
pub mod window;

pub use dataset::{align, split_by_date, AlignedDataset, GapPolicy, SplitSpec};
pub use error::{Error, Result};
pub use metrics::{classification_accuracy, mae, on_off_states, ApplianceMetrics, MetricReport};
pub use model::{Disaggregator, Family, ModelError};
pub use normalize::{standardize, Scaler};
pub use series::{load_csv, load_csv_with_period, resample, write_csv, PowerSeries, GAP};
pub use window::{make_windows, trailing_windows, Padding, Windows};
