use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice size must be even and at least 4, got {0}")]
    InvalidSize(usize),
    #[error("long-range exponent must satisfy 0 < alpha < 1, got {0}")]
    AlphaOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureNonConvergence { estimate: f64, tolerance: f64 },
    #[error("r = {r} is in the ordered phase for lambda = {lambda} (need r > {threshold})")]
    OrderedPhase { r: f64, lambda: f64, threshold: f64 },
    #[error("targets require occupation factor {occupation} < 1")]
    Unreachable { occupation: f64 },
    #[error("numerical blowup at t = {time}: {detail}")]
    NumericalBlowup { time: f64, detail: String },
    #[error("orbit is not periodic: classical energy {energy} > 0")]
    NonPeriodic { energy: f64 },
    #[error("monodromy determinant {det} deviates from 1")]
    InvalidMonodromy { det: f64 },
    #[error("reduced covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("symplectic eigenvalue {min_sigma} violates the uncertainty bound 1/2")]
    UncertaintyViolation { min_sigma: f64 },
}

impl Error {
    /// True for failures of the numerics (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::NumericalBlowup { .. }
                | Error::InvalidMonodromy { .. }
                | Error::NotPositiveDefinite
                | Error::UncertaintyViolation { .. }
        )
    }
}
