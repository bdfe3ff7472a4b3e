use thiserror::Error;

/// Errors raised by objectives, line searches and the iteration schemes built on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value encountered while evaluating {context}")]
    NonFiniteEvaluation { context: &'static str },

    #[error("line search stalled: Armijo condition still fails after {halvings} shrinkages")]
    StalledLineSearch { halvings: usize },

    #[error("not a descent direction: <grad f(x), v> = {slope}")]
    NonDescentDirection { slope: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point is not a generalized saddle (classified as {0})")]
    NotASaddle(String),

    #[error("learning-rate finder failed: all {batches} batches stalled")]
    LrFinderFailed { batches: usize },

    #[error("direction condition unmet after {shrinks} momentum shrinkages")]
    DirectionStalled { shrinks: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
