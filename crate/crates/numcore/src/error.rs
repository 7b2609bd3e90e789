use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, NumError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(NumError::InvalidArgument(msg.into()))
}
