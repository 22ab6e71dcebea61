use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A finite-difference neighbour of the evaluation point was not finite.
    #[error("non-finite log-likelihood at finite-difference neighbour of coordinate {coordinate}")]
    NonFiniteNeighbor { coordinate: usize },

    #[error("log-likelihood is not finite at the evaluation point")]
    NonFiniteValue,

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("fit has no covariance matrix")]
    MissingCovariance,

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("need at least {need} posterior draws, got {got}")]
    InsufficientDraws { got: usize, need: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
