use alloc::boxed::Box;

use crate::precoder::DesignReport;

/// Errors produced by the design and allocation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("noise covariance is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NonPositiveDefiniteNoise { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("matrix is not positive semi-definite: {0}")]
    NotPsd(&'static str),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(&'static str),

    #[error("degenerate allocation problem: every weight-gain product is zero")]
    DegenerateProblem,

    #[error("ordering violated at index {index}")]
    OrderingViolation { index: usize },

    #[error("{count} channels exceeds the supported maximum of {max}")]
    TooManyChannels { count: usize, max: usize },

    #[error("{count} streams exceeds the supported maximum of {max}")]
    TooManyStreams { count: usize, max: usize },

    /// The iteration hit its cap. The best iterate found so far is attached.
    #[error("no convergence after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        best: Box<DesignReport>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
