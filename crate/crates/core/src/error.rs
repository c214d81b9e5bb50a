//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    /// Regularization must be positive and finite.
    #[error("regularization epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    /// The Mahalanobis weight matrix is not symmetric positive definite.
    #[error("weight matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// The dual objective is only defined for strictly positive multipliers.
    #[error("dual multiplier must be > 0, got {0}")]
    LambdaOutOfDomain(f64),

    /// The kernel law of this cost has no built-in sampler.
    #[error("cost `{0}` has no closed-form kernel sampler")]
    UnsupportedSampling(&'static str),

    /// The kernel normalizer of this cost is infinite.
    #[error("cost `{0}` has an infinite kernel normalizer")]
    InfiniteNormalizer(&'static str),

    /// The λ-subgradient has the same sign at both ends of the bracket.
    #[error("invalid bracket [{lo}, {hi}]: subgradient signs agree ({grad_lo}, {grad_hi})")]
    InvalidBracket {
        lo: f64,
        hi: f64,
        grad_lo: f64,
        grad_hi: f64,
    },

    /// The radius must be strictly positive for the requested operation.
    #[error("radius must be > 0, got {0}")]
    NonPositiveRadius(f64),

    #[error("objective is not finite ({0})")]
    NonFinite(f64),

    /// Matrix scaling stopped before the marginals matched.
    #[error("matrix scaling did not converge in {iterations} iterations (violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },

    /// The inner supremum of a Wasserstein dual sits on the search boundary.
    #[error("inner supremum attained on the search boundary at z = {0}")]
    GrowthCondition(f64),

    #[error("label must be -1 or +1, got {0}")]
    InvalidLabel(f64),

    /// A probability vector does not sum to one or has negative entries.
    #[error("`{0}` is not a probability vector")]
    NotProbability(&'static str),

    /// A conic-program text could not be decoded.
    #[error("malformed conic program at line {line}: {reason}")]
    MalformedConic { line: usize, reason: &'static str },
}

pub type Result<T> = core::result::Result<T, Error>;
