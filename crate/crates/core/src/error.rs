use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbdpError {
    /// The grid dimensions or jump bounds break a standing assumption.
    #[error("invalid grid shape: {0}")]
    Shape(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not defined for this configuration.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A transition probability that must be positive is zero or missing.
    #[error("positivity violated: {0}")]
    Positivity(String),

    /// The model does not admit a consistent vertex/edge parametrization.
    #[error("inconsistent model: {0}")]
    Consistency(String),

    /// Matrix structure (irreducibility, sign pattern) is not as required.
    #[error("structure error: {0}")]
    Structure(String),

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    Convergence { iterations: usize, last_change: f64 },

    /// Malformed or schema-violating input document.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, GbdpError>;
