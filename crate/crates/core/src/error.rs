use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("label error at row {row}: value {value} is not one of 0, 1, -1, +1")]
    Label { row: usize, value: String },

    #[error("propensity error at row {row}: {value} is not strictly inside (0, 1)")]
    Propensity { row: usize, value: f64 },

    #[error("reward at row {row} is {value}, outside the declared bound [-{bound}, {bound}]")]
    RewardBound { row: usize, value: f64, bound: f64 },

    #[error("overlap violation: {count} propensities outside [{c0}, {}] (rows {rows:?})", 1.0 - .c0)]
    Overlap { c0: f64, count: usize, rows: Vec<usize> },

    #[error("size error: {0}")]
    Size(String),

    #[error("shape mismatch: expected dimension {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("degenerate weights: total sample weight is zero")]
    DegenerateWeights,

    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("dimension {0} is not supported by grid-based geometry (maximum 3)")]
    DimensionUnsupported(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
