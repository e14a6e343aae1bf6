use thiserror::Error;

/// Errors raised by the Ball Mapper engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("epsilon must be a positive finite number, got {0}")]
    InvalidEpsilon(f64),

    #[error("scan order is not a permutation of 0..{n}: {reason}")]
    InvalidOrder { n: usize, reason: String },

    #[error("coloration needs {0}")]
    MissingColorSource(String),

    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("column {index} ({name}) is constant")]
    ConstantColumn { index: usize, name: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown export format {0:?} (expected json, dot or csv)")]
    UnknownFormat(String),

    #[error("malformed graph document: {0}")]
    MalformedGraph(String),
}

pub type Result<T> = std::result::Result<T, Error>;
