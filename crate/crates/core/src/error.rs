use thiserror::Error;

/// Errors raised by the analytic and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation cannot handle the requested size or sensor model.
    #[error("capability error: {0}")]
    Capability(String),

    /// A pole of the moment generating function was hit.
    #[error("singularity at s = {re} + {im}j")]
    Singularity { re: f64, im: f64 },

    #[error("degenerate channel: ||H 1_K|| = 0")]
    DegenerateChannel,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A quadrature node or intermediate value is not finite, or a
    /// probability left the roundoff window.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Threshold bisection could not bracket the requested false-alarm rate.
    #[error("target {target} outside achieved range [{low}, {high}] on the bracket")]
    Bracket { target: f64, low: f64, high: f64 },

    #[error("degenerate objective: {0}")]
    DegenerateObjective(String),

    #[error("degenerate statistic: zero variance under {0}")]
    ZeroVariance(&'static str),

    /// Malformed table or configuration text.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
