use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("sync error: frame at {frame_ts:.3}s, pose at {pose_ts:.3}s (tolerance {tolerance:.3}s)")]
    Sync {
        frame_ts: f64,
        pose_ts: f64,
        tolerance: f64,
    },

    #[error("extinction at step {step}: all particle weights are zero")]
    Extinction { step: usize },

    #[error("under-determined regression: {points} points for {breaks} breakpoints")]
    UnderDetermined { points: usize, breaks: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("spec error: {0}")]
    Spec(String),

    #[error("association error: unmatched ids {0:?}")]
    Association(Vec<String>),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("png error: {0}")]
    Png(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Whether the error stems from bad input (exit code 1) rather than a
    /// runtime failure (exit code 2).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Spec(_)
                | Error::Usage(_)
                | Error::Json(_)
                | Error::Association(_)
        )
    }
}
