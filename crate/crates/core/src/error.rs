use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KwsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KwsError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("not differentiable at probe point: {0}")]
    NotDifferentiable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed WAV: {0}")]
    Wav(String),

    #[error("audio: {0}")]
    Audio(String),

    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },

    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },

    #[error("data: {0}")]
    Data(String),
}

impl KwsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KwsError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Self {
        KwsError::Format { what, msg: msg.into() }
    }
}
