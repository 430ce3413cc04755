use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vector must have at least one component")]
    EmptyVector,

    #[error("non-finite value {value} at component {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("gradient set needs at least one task")]
    NoTasks,

    #[error("weight {index} must be strictly positive and finite, got {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("expected {expected} weights, got {actual}")]
    WeightCount { expected: usize, actual: usize },

    #[error("task index {index} out of range 1..={max}")]
    TaskIndex { index: usize, max: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Invariant { line: usize, message: String },

    #[error("no observations recorded")]
    EmptyStats,

    #[error("need at least {needed} samples, got {actual}")]
    TooFewSamples { needed: usize, actual: usize },

    #[error("base covariance trace is zero")]
    ZeroTrace,

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("strategy {0} needs a noise source")]
    MissingNoise(&'static str),
}
