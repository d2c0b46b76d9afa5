use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("index out of range: {0}")]
    Range(String),
    #[error("unsupported audio: {0}")]
    Audio(String),
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("checkpoint tensor `{tensor}`: {reason}")]
    Tensor { tensor: String, reason: String },
    #[error("non-finite loss in batch [{manifest}]")]
    NonFiniteLoss { manifest: String },
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
