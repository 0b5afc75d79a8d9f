use thiserror::Error;

/// Errors raised by the pricing and hedging pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    /// A numerical check failed beyond its tolerance.
    #[error("{check} failed at {location}: |error| = {error:.3e} > tolerance {tolerance:.3e}")]
    Tolerance {
        check: String,
        location: String,
        error: f64,
        tolerance: f64,
    },

    /// An adaptive quadrature ran out of refinement budget.
    #[error(
        "quadrature did not converge: estimated error {estimate:.3e} > requested {requested:.3e}"
    )]
    Quadrature { estimate: f64, requested: f64 },

    /// The requested combination of model and pipeline is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn tolerance(
        check: impl Into<String>,
        location: impl Into<String>,
        error: f64,
        tolerance: f64,
    ) -> Self {
        Error::Tolerance {
            check: check.into(),
            location: location.into(),
            error: error.abs(),
            tolerance,
        }
    }

    /// True for failures of numerical tolerance checks (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Tolerance { .. } | Error::Quadrature { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}
