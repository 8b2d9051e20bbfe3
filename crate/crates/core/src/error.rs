use thiserror::Error;

/// Errors raised by problem construction and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdError {
    #[error("invalid problem: {}", .0.join("; "))]
    InvalidProblem(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    /// A Sinkhorn denominator vanished (usually `exp(-lambda * d)` underflow).
    #[error("{which} denominator vanished at index {index}")]
    ZeroDenominator { which: &'static str, index: usize },

    #[error("root finder for {what} did not converge after {steps} steps (residual {residual:e})")]
    RootNotConverged {
        what: &'static str,
        steps: usize,
        residual: f64,
    },

    #[error("target distortion {target} unreachable: achievable open interval is ({low}, {high})")]
    TargetUnreachable { target: f64, low: f64, high: f64 },

    /// The slope search collapsed onto a single slope whose achievable
    /// distortions span an interval containing the target.
    #[error(
        "distortion {target} lies on a linear segment of slope {lambda}: \
         achieved distortion jumps from {d_low} to {d_high}"
    )]
    LinearSegment {
        target: f64,
        lambda: f64,
        d_low: f64,
        d_high: f64,
    },
}

pub type Result<T> = std::result::Result<T, RdError>;
