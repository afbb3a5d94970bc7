use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid series `{label}`: {reason}")]
    InvalidSeries { label: String, reason: String },

    #[error("csv line {line}: {reason}")]
    Csv { line: u64, reason: String },

    #[error("csv line {line}: non-monotone timestamps")]
    NonMonotone { line: u64 },

    #[error("csv contains no data rows")]
    NoRows,

    #[error("incompatible periods: {from} s cannot be resampled to {to} s")]
    IncompatiblePeriods { from: i64, to: i64 },

    #[error("channels have mixed periods")]
    MixedPeriods,

    #[error("channel grids are offset by a non-multiple of the period")]
    MisalignedGrids,

    #[error("empty intersection of channel time ranges")]
    EmptyIntersection,

    #[error("drop_row would leave a non-contiguous grid")]
    NonContiguous,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("split spec outside data range")]
    SplitOutOfRange,

    #[error("{0} split is empty")]
    EmptySplit(&'static str),

    #[error("need at least {needed} non-gap samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("window and stride must be >= 1")]
    InvalidWindow,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
}
