use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("part {index} is negative ({value})")]
    NegativePart { index: usize, value: f64 },
    #[error("parts sum to {sum}, exceeding one by {excess}")]
    SumExceedsOne { sum: f64, excess: f64 },
    #[error("part {index} is not finite")]
    NonFinite { index: usize },
    #[error("all parts are zero")]
    AllZero,
    #[error("grid resolution {0} is too small")]
    BadResolution(usize),
    #[error("grid tolerance {eps} must lie in (0, {max})")]
    BadTolerance { eps: f64, max: f64 },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid Dirichlet parameters: {0}")]
    InvalidParams(String),
    #[error("point lies on the simplex boundary")]
    BoundaryPoint,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("sample is empty")]
    EmptySample,
    #[error("no observed responses")]
    NoObservedResponses,
    #[error("observed unit {index} has non-positive propensity {value}")]
    ZeroPropensityOnObserved { index: usize, value: f64 },
    #[error("at least 2 observed responses are required, got {observed}")]
    TooFewObserved { observed: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("bias functional vanishes; optimal bandwidth undefined")]
    ZeroPhi,
    #[error("root finding did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
