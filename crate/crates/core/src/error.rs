use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid problem instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assumption {0} is a property of the noise model; check it with the `noise` module")]
    Delegated(String),

    #[error("numeric failure at iteration {t}: {reason}")]
    NumericFailure { t: usize, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for trace of length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid pairing: {0}")]
    InvalidPairing(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
