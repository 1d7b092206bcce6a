use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PiError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("tape/model consistency: {0}")]
    Consistency(String),
    #[error("memory budget exceeded: {0}")]
    MemoryBudget(String),
}

pub type Result<T, E = PiError> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PiError::Shape(msg.into()))
}

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PiError::Parameter(msg.into()))
}
