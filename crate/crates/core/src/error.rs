use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("embedding policy: {0}")]
    Policy(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("empty sequence: {0}")]
    EmptySequence(String),

    #[error("at least 2 generations are required, got {0}")]
    InsufficientGenerations(usize),

    #[error("at least 2 samples are required, got {0}")]
    InsufficientSamples(usize),

    #[error("trace `{trace}` is missing field `{field}`")]
    MissingField { trace: String, field: &'static str },

    #[error("labels contain a single class")]
    DegenerateLabels,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid trace `{trace}`: {reason}")]
    InvalidTrace { trace: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error at byte {position}: {message}")]
    Format { position: u64, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid_trace(trace: &str, reason: impl Into<String>) -> Self {
        Error::InvalidTrace {
            trace: trace.to_owned(),
            reason: reason.into(),
        }
    }

    pub(crate) fn format(position: u64, message: impl Into<String>) -> Self {
        Error::Format {
            position,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input (as opposed to I/O or numerical failure).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Numeric(_))
    }
}
