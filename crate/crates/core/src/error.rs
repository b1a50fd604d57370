use thiserror::Error;

/// Errors raised by model construction, the Lanczos recurrences and the evolution routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("site index {site} outside 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max |M - M^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("system too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {context} at step {step}")]
    NonFinite { context: &'static str, step: usize },

    #[error("ODE step control did not converge: {0}")]
    NoConvergence(String),

    #[error("bases were not stored; rerun the tridiagonalization with store_bases = true")]
    MissingBases,

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::NoConvergence(_) | Error::TooLarge(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
