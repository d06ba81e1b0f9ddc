use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("zero mode carries Lebesgue measure and cannot be sampled or integrated")]
    LebesgueZeroMode,

    #[error("Helmholtz operator degenerates for mass 0 and mode 0")]
    DegenerateMode,

    #[error("spectrum is not increasing at index {0}")]
    NonIncreasingSpectrum(u64),

    #[error("radius mismatch on sewn boundary: {0} vs {1}")]
    RadiusMismatch(f64, f64),

    #[error("truncation mismatch on sewn boundary: {0} vs {1}")]
    TruncationMismatch(usize, usize),

    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    #[error("quadrature grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("cutoff mismatch between counterterms ({counterterm}) and sampling ({sampling})")]
    CutoffMismatch { counterterm: String, sampling: String },

    #[error("regularized sum has not been validated against its quadrature oracle in this process")]
    ZetaOracleUnvalidated,

    #[error("regularized sum failed validation: {0}")]
    ZetaOracleFailed(String),

    #[error("unstable fit: {0}")]
    UnstableFit(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("interaction polynomial is not bounded below")]
    UnboundedInteraction,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
