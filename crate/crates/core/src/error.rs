use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GosaError {
    /// A caller broke a documented precondition (bad shape, bad parameter, empty input).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The index is undefined (zero denominator, zero variance, probability-zero sample).
    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("optimization failed: {reason} (interval [{lo}, {hi}], {evaluations} evaluations)")]
    Optimization {
        reason: String,
        lo: f64,
        hi: f64,
        evaluations: usize,
    },

    #[error("numerical failure: {reason} (achieved error estimate {achieved:e})")]
    Numerical { reason: String, achieved: f64 },
}

impl GosaError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        GosaError::Contract(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        GosaError::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        GosaError::Degenerate(msg.into())
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, GosaError::Degenerate(_))
    }
}

pub type Result<T, E = GosaError> = std::result::Result<T, E>;
