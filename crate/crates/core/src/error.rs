use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke a documented precondition (length mismatch, `p < 1`, `S > T`, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A point lies outside the domain on which a map is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("numerical failure in {what}: residual {residual:e}")]
    Numerical { what: &'static str, residual: f64 },

    /// Parameters violate a bound required by the algorithm.
    #[error("configuration error: {0}")]
    Config(String),

    /// A runtime invariant (clipping, simplex, floors) was violated.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
