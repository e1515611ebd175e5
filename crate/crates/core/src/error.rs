use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error(
        "quadrature did not converge: requested {requested:.3e}, achieved {achieved:.3e} \
         after {subdivisions} subdivisions (best value {value})"
    )]
    Quadrature {
        value: Complex64,
        achieved: f64,
        requested: f64,
        subdivisions: usize,
    },

    #[error("ill-conditioned fit: condition number {condition:.3e} exceeds {limit:.3e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("Fock basis dimension {dim} exceeds the configured maximum {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error(
        "ambiguous rank decision: singular value {value:.3e} lies in [{lo:.3e}, {hi:.3e}]; \
         pass an explicit tolerance"
    )]
    AmbiguousRank { value: f64, lo: f64, hi: f64 },

    #[error("correction fit discrepancy {discrepancy:.3e} exceeds budget {budget:.3e}")]
    BudgetExceeded { discrepancy: f64, budget: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
