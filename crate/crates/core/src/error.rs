use thiserror::Error;

use crate::optimizer::OptimumReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("series did not converge after {terms} terms")]
    NonConvergent { terms: usize },

    #[error("network draws no grid power at this operating point")]
    DegenerateNetwork,

    #[error("no sign change of the stationary gap in [{lo:e}, {hi:e}]")]
    BracketFailure { lo: f64, hi: f64 },

    /// The alternating loop ran out of iterations. The best iterate found so
    /// far is attached.
    #[error("alternating optimization stopped after {} iterations", .best.iterations)]
    MaxIterations { best: Box<OptimumReport> },

    #[error("realization {index} held no base station after {attempts} attempts")]
    EmptyRealization { index: u64, attempts: u32 },

    #[error("only {valid} of {requested} realizations held a base station")]
    InsufficientSamples { valid: usize, requested: usize },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
