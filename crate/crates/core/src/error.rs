use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected length {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid reference energy {0}: must be negative")]
    InvalidReference(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("objective failed at trial {trial}: {source}")]
    Objective {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, found: usize) -> Self {
        Error::Dimension { expected, found }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::InvalidReference(_) => 2,
            Error::Capacity(_) => 3,
            Error::Objective { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
