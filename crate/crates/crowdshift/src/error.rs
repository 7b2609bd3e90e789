use evalkit::EvalError;
use netmodel::NetError;
use numcore::NumError;
use scenegen::SceneError;
use selftrain::TrainError;
use thiserror::Error;

/// Failures grouped by how the process should exit.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 2,
            Self::Io(_) => 3,
            Self::Invariant(_) => 4,
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        Self::Io(format!("{context}: {err}"))
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Invalid(msg.into()))
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::InvalidArgument(_) => Self::Invalid(e.to_string()),
            NumError::Domain(_) | NumError::NonFinite(_) => Self::Invariant(e.to_string()),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::InvalidArgument(_) => Self::Invalid(e.to_string()),
            SceneError::Tensor(t) => t.into(),
            _ => Self::Io(e.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::InvalidArgument(_) | NetError::Generation(_) => Self::Invalid(e.to_string()),
            NetError::Checkpoint { .. } => Self::Io(e.to_string()),
            NetError::Num(n) => n.into(),
            NetError::Scene(s) => s.into(),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidArgument(m) => Self::Invalid(m),
            TrainError::InvariantViolation(m) => Self::Invariant(m),
            TrainError::Net(n) => n.into(),
            TrainError::Num(n) => n.into(),
            TrainError::Scene(s) => s.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Net(n) => n.into(),
            _ => Self::Invalid(e.to_string()),
        }
    }
}
