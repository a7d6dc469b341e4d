use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The CLI maps each variant to an exit code through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown vertex {0}")]
    UnknownVertex(usize),

    #[error("kernel is periodic with period {period}; limit-based operations are undefined")]
    Periodic { period: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("check failed: {0}")]
    Check(String),

    #[error("missing prerequisite: {0}")]
    Dependency(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::UnknownVertex(_)
            | Error::Dependency(_)
            | Error::Json(_) => 2,
            Error::Solver(_) | Error::Periodic { .. } => 3,
            Error::Check(_) => 4,
            Error::Io(_) | Error::Csv(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
