use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates the documented precondition of an operation.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Input matrix failed structural validation (shape, symmetry).
    #[error("invalid matrix: {0}")]
    Validation(String),

    /// An iterative routine did not converge within its cap.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The request is outside what the implementation supports (caps, overflow).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The input is degenerate for the requested identity.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// `z` must lie off the real axis.
    #[error("spectral point must have nonzero imaginary part, got {0}")]
    Domain(String),

    /// Experiment configuration rejected; names the offending field.
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed edge-list or result file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
