use thiserror::Error;

/// Errors raised by the bound evaluation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation (wrong alphabet,
    /// empty vector, invalid probability table, loss out of range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested evaluation method does not apply to this problem.
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The enumeration would exceed the configured state budget.
    #[error("state space of {states} exceeds budget {budget}")]
    Resource { states: u128, budget: u128 },

    /// A mathematical invariant that should hold was observed to fail.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
