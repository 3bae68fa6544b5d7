use thiserror::Error;

/// Errors raised by pool math, trajectory construction and backtests.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight vector must have at least 2 components, got {len}")]
    BadLength { len: usize },

    #[error("weights sum to {sum}, expected 1 within {tolerance:e}")]
    SumNotOne { sum: f64, tolerance: f64 },

    #[error("weight {index} = {value} lies outside ({epsilon:e}, 1 - {epsilon:e})")]
    OutOfBounds {
        index: usize,
        value: f64,
        epsilon: f64,
    },

    #[error("token index {index} out of range for a pool of {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("reserve {index} = {value} must be strictly positive and finite")]
    NonPositiveReserve { index: usize, value: f64 },

    #[error("price {index} = {value} is invalid: {reason}")]
    InvalidPrice {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("pool is not at equilibrium with market prices: token {token} off by {relative_error:e} (relative)")]
    NotAtEquilibrium { token: usize, relative_error: f64 },

    #[error("trajectory does not start at the pool weights (component {index}: {expected} vs {found})")]
    StartMismatch {
        index: usize,
        expected: f64,
        found: f64,
    },

    #[error("intermediate weight {index} = {value} is outside [{low}, {high}]")]
    MidpointOutOfRange {
        index: usize,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("invalid weight delta: {0}")]
    InvalidDelta(String),

    #[error("Lambert W0 is only evaluated for x >= 0, got {0}")]
    DomainError(f64),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient history: need {needed} rows, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("price series line {line}: {message}")]
    MalformedSeries { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
