use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cutoff too small: truncated tail population {tail:.3e} exceeds {limit:.1e}")]
    CutoffInsufficient { tail: f64, limit: f64 },

    #[error("profile is not finite at p = {p}")]
    NonFiniteProfile { p: f64 },

    #[error("state is not a valid density matrix: {reason}")]
    InvalidState { reason: String },

    #[error("step size collapsed to {step:.3e} at t = {time}")]
    StepSizeCollapse { time: f64, step: f64 },

    #[error("truncation guard tripped: top-band population {population:.3e} at t = {time}")]
    TruncationTrip { time: f64, population: f64 },

    #[error("no convergence: {reason}")]
    NoConvergence { reason: String },

    #[error("steady state has eigenvalue {min_eigenvalue:.3e} below tolerance")]
    NegativeSteadyState { min_eigenvalue: f64 },

    #[error("phase-space grid under-resolved: normalization defect {defect:.3e}")]
    GridUnderresolved { defect: f64 },

    #[error("no real solution: {reason}")]
    NoRealSolution { reason: String },

    #[error("coupling unbounded on the resolved range")]
    UnboundedCoupling,

    #[error("operation not supported for this basis: {reason}")]
    UnsupportedBasis { reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
