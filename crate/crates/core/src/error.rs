use thiserror::Error;

/// Errors raised by the model, geometry, LMI, solver and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(String),

    #[error("ill-conditioned {what} (condition number {cond:.3e})")]
    IllConditioned { what: String, cond: f64 },

    #[error("assignment is missing variable `{0}`")]
    MissingVariable(String),

    #[error("trajectory diverged at t = {time}: |x| = {norm:.3e}")]
    Diverged { time: f64, norm: f64 },

    #[error("solver backend error: {0}")]
    Backend(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
