//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by model construction, streaming, estimation and bound evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("invalid spike strength {0}: must be positive")]
    InvalidSpike(f64),
    #[error("eigenvectors are not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("eigenvalues must be descending with a strict top gap")]
    NotDescending,
    #[error("sample stream exhausted after {0} samples")]
    StreamExhausted(usize),
    #[error("non-finite value in input at coordinate {0}")]
    NonFiniteInput(usize),
    #[error("eigengap must be positive, got {0}")]
    InvalidGap(f64),
    #[error("k = {k} outside [1, {d}]")]
    InvalidK { k: usize, d: usize },
    #[error("minimum support entry must be positive, got {0}")]
    InvalidMinEntry(f64),
    #[error("vector vanishes on the requested support")]
    ZeroAfterTruncation,
    #[error("vector is not unit norm (norm {0})")]
    NotUnit(f64),
    #[error("insufficient data: need at least {needed} samples, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("no theta in (0.5, 1) solves the recursion equation (got {0})")]
    NoValidTheta(f64),
    #[error("eigenvalues of the 2x2 matrix are too close for the closed form")]
    NearDegenerateEigenvalues,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
