use thiserror::Error;

/// Errors raised by the analytic and simulation routines.
///
/// Every variant names the operation that produced it so that callers (the
/// CLI in particular) can surface where a numerical problem originated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: argument out of domain: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("{op}: degenerate input: {detail}")]
    Degenerate { op: &'static str, detail: String },

    #[error("{op}: singular system, pivot {pivot} has magnitude {magnitude:e}")]
    Singular {
        op: &'static str,
        pivot: usize,
        magnitude: f64,
    },

    #[error("{op}: quadrature did not reach tolerance {target:e} (estimate {achieved:e})")]
    Quadrature {
        op: &'static str,
        target: f64,
        achieved: f64,
    },

    #[error("{op}: no root in the admissible interval: {detail}")]
    NoRoot { op: &'static str, detail: String },

    #[error("{op}: resource limit exceeded: {detail}")]
    Resource { op: &'static str, detail: String },

    #[error("invalid parameter `{field}`: {detail}")]
    InvalidParameter { field: &'static str, detail: String },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(field: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            detail: detail.into(),
        }
    }

    /// Name of the operation that failed, when the variant carries one.
    pub fn operation(&self) -> Option<&'static str> {
        match self {
            Error::Domain { op, .. }
            | Error::Degenerate { op, .. }
            | Error::Singular { op, .. }
            | Error::Quadrature { op, .. }
            | Error::NoRoot { op, .. }
            | Error::Resource { op, .. } => Some(op),
            Error::InvalidParameter { .. } => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
