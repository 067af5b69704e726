use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (bounds, schema, ranges).
    #[error("validation error: {0}")]
    Validation(String),

    /// Input could not be parsed or has the wrong shape.
    #[error("format error: {0}")]
    Format(String),

    #[error("transport problem has an empty side")]
    EmptySide,

    #[error("problem size {size} exceeds the oracle guard of {limit}")]
    SizeGuard { size: usize, limit: usize },

    /// Non-finite values, divergence, or a solver that failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::EmptySide | Error::SizeGuard { .. } => 2,
            Error::Format(_) | Error::Json(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
