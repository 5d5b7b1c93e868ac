use thiserror::Error;

/// Errors raised by the rank-selection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RrrError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("shape mismatch: {0}")]
    ShapeError(String),

    #[error("design matrix is identically zero")]
    ZeroDesign,

    #[error("rank {rank} outside admissible range 0..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("noise variance estimate infeasible: n = {n} equals rank(X) = {q}")]
    InfeasibleVarianceEstimate { n: usize, q: usize },

    #[error("no admissible rank for the criterion denominator")]
    NoAdmissibleRank,

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    #[error("quantity not available: {0}")]
    NotAvailable(String),

    #[error("self-tuning trace violates {0}")]
    TraceViolation(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for RrrError {
    fn from(e: std::io::Error) -> Self {
        RrrError::Io(e.to_string())
    }
}

impl From<csv::Error> for RrrError {
    fn from(e: csv::Error) -> Self {
        RrrError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for RrrError {
    fn from(e: serde_json::Error) -> Self {
        RrrError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RrrError>;
