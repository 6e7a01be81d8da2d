use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: error estimate {achieved:.3e} > target {target:.3e} after {intervals} intervals")]
    Quadrature {
        achieved: f64,
        target: f64,
        intervals: usize,
    },

    #[error("test mass {m} lies on the seam at {seam}")]
    Seam { m: f64, seam: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
