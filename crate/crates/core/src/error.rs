use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the scorer transport and wire protocol.
#[derive(Debug, Error)]
pub enum ScorerError {
    /// The scorer process or connection failed before answering every request.
    #[error("scorer transport error: {0}")]
    Transport(String),
    /// The scorer answered, but the answer violates the line protocol.
    #[error("scorer protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{location}:{line}: {message}")]
    Parse {
        location: String,
        line: usize,
        message: String,
    },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid run: {0}")]
    InvalidRun(String),

    #[error("unsupported index format version {found} (this build reads version {expected})")]
    IndexVersion { found: u8, expected: u8 },

    #[error("not an index file: {0}")]
    IndexFormat(String),

    #[error("unresolvable id(s): {}", .0.join(", "))]
    Unresolved(Vec<String>),

    #[error("topic {topic}: {source}")]
    Rerank {
        topic: String,
        #[source]
        source: ScorerError,
    },

    #[error(transparent)]
    Scorer(#[from] ScorerError),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(location: impl AsRef<Path>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.as_ref().display().to_string(),
            line,
            message: message.into(),
        }
    }

    /// True when the error stems from bad input or a violated stage contract
    /// rather than a failure while doing the work.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Parse { .. }
            | Error::MissingColumn(_)
            | Error::InvalidArgument(_)
            | Error::InvalidRun(_)
            | Error::IndexVersion { .. }
            | Error::IndexFormat(_)
            | Error::Unresolved(_) => true,
            Error::Rerank { .. } | Error::Scorer(_) | Error::Json(_) => false,
        }
    }
}
