use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(PathBuf),
    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Tensor(#[from] numcore::NumError),
}

pub type Result<T> = std::result::Result<T, SceneError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SceneError::InvalidArgument(msg.into()))
}
