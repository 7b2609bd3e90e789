use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mask generation failed: {0}")]
    Generation(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error(transparent)]
    Num(#[from] numcore::NumError),
    #[error(transparent)]
    Scene(#[from] scenegen::SceneError),
}

pub type Result<T> = std::result::Result<T, NetError>;
