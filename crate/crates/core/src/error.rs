use thiserror::Error;

/// Errors raised by the privatisation, estimation and detection layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("out-of-order observation: expected time index {expected}, got {got}")]
    Sequencing { expected: u64, got: u64 },

    #[error("time index {0} is not retained by the prefix state")]
    NotRetained(u64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
