//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite loss in {stage} at epoch {epoch} (lr={lr})")]
    NonFiniteLoss { stage: String, epoch: usize, lr: f64 },

    #[error("datasets '{left}' and '{right}' do not share modality '{modality}'")]
    MissingSharedModality {
        left: String,
        right: String,
        modality: String,
    },

    #[error("ground-truth labels unavailable: {0}")]
    MissingGroundTruth(String),

    #[error("malformed artifact at {path}: {message}")]
    Format { path: String, message: String },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
