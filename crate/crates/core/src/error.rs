use thiserror::Error;

/// Errors raised by estimation, selection and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MqfError {
    #[error("invalid quantile level {0}: must lie strictly inside (0, 1)")]
    InvalidTau(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("no observed entries in {0}")]
    EmptySlice(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("normalization violated: {0}")]
    NotNormalized(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, MqfError>;
