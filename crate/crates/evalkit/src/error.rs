use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Pearson correlation with a zero denominator.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error(transparent)]
    Net(#[from] netmodel::NetError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(EvalError::InvalidArgument(msg.into()))
}
