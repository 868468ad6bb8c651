use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("selection is empty")]
    EmptySelection,

    #[error("selection index {index} out of range for {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("oracle size limit exceeded: {points} points, k = {k} (limits: at most {max_points} points, k at most {max_k})")]
    OracleLimit {
        points: usize,
        k: usize,
        max_points: usize,
        max_k: usize,
    },

    #[error("unknown method `{0}` (known: random, kcenter, evtp, divmax)")]
    UnknownMethod(String),

    #[error("unknown preset `{name}` (known: {known})")]
    UnknownPreset { name: String, known: String },

    #[error("malformed input {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by unreadable or malformed input data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Format { .. }
                | Error::InvalidGrid(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
