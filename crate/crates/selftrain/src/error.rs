use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A training-time contract was broken, e.g. stale or future pseudo labels.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Net(#[from] netmodel::NetError),
    #[error(transparent)]
    Num(#[from] numcore::NumError),
    #[error(transparent)]
    Scene(#[from] scenegen::SceneError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(TrainError::InvalidArgument(msg.into()))
}
