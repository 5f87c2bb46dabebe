use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("observation {row}: {message}")]
    Observation { row: usize, message: String },

    /// Derivatives requested where the likelihood is zero.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible parameter: {0}")]
    Infeasible(String),

    #[error("singular observed information (rank {rank} of {dim})")]
    SingularInformation { rank: usize, dim: usize },

    #[error("inference on a penalized fit (lambda1={lambda1}, lambda2={lambda2})")]
    PenalizedInference { lambda1: f64, lambda2: f64 },

    #[error("models are not nested: restricted log-likelihood exceeds the full one by {0}")]
    NotNested(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
