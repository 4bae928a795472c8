//! Error type shared by all engine modules.

use thiserror::Error;

/// Errors surfaced by the simulation and strategy engine.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Two series that must live on the same grid have different lengths.
    #[error("grid mismatch: series of length {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    /// A time grid violates its construction invariants.
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    /// A capitalization/weight path violates its construction invariants.
    #[error("invalid market path: {0}")]
    InvalidPath(String),

    /// Rank pair outside 1 <= k < l <= d.
    #[error("invalid rank pair ({k}, {l}) for dimension {d}")]
    InvalidRankPair { k: usize, l: usize, d: usize },

    /// A model or generator parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Requested ensemble member does not exist.
    #[error("path index {index} out of range for ensemble of size {size}")]
    PathIndexOutOfRange { index: usize, size: usize },

    /// The derivative map blew up somewhere along the path.
    #[error("derivative map not finite at time index {index} (t = {time})")]
    NonFiniteGradient { index: usize, time: f64 },

    /// Multiplicative generation needs the generating function positive
    /// at every visited point.
    #[error("generating function not positive at time index {index} (value = {value})")]
    NonPositiveValue { index: usize, value: f64 },

    /// The generating function has no closed-form Gamma recipe.
    #[error("no analytic gamma recipe for generator kind `{0}`")]
    NoAnalyticRecipe(String),

    /// Sampled supergradient inequality failed for a custom concave function.
    #[error("supergradient inequality violated: {0}")]
    NotConcave(String),

    /// Normalization needs a nonnegative starting value.
    #[error("normalization requires G(mu(0)) >= 0, got {0}")]
    NegativeAtInitial(f64),

    /// An operation that requires unit initial value received something else.
    #[error("generating function not normalized: G(mu(0)) = {0}, expected 1")]
    NotNormalized(f64),

    /// Portfolio weights are undefined where the strategy value vanishes.
    #[error("strategy value vanishes at time index {0}; portfolio weights undefined")]
    ValueVanishes(usize),

    /// Operation not supported for this input kind.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
