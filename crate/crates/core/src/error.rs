use thiserror::Error;

/// Errors raised by model evaluation and fitting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input (bad unit token, mismatched lengths, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A linear system or design matrix is singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// A root-finding target is not bracketed by the supplied interval.
    #[error(
        "target rate {target:e} 1/s outside achievable range [{achievable_low:e}, {achievable_high:e}] 1/s"
    )]
    Bracket {
        target: f64,
        achievable_low: f64,
        achievable_high: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
