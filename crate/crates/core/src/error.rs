use thiserror::Error;

/// Errors raised by the solvers, oracles and certificate checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("graph is not connected ({reached} of {n} vertices reachable from vertex 0)")]
    Disconnected { reached: usize, n: usize },

    /// `log` of a primal entry exceeded the representable range.
    #[error("overflow at primal entry {entry}: log value {log_value:.3e}")]
    Overflow { entry: usize, log_value: f64 },

    #[error("degenerate vertex {0}: zero outgoing mass")]
    DegenerateVertex(usize),

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("infeasible instance: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
