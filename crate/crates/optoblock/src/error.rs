//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by operator construction, parameter validation, solvers
/// and the sweep engine.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid Fock dimension {dim}: truncated mode needs at least 2 levels")]
    InvalidDimension { dim: usize },

    #[error("mode index {index} out of range for a {n_modes}-mode space")]
    ModeIndexOutOfRange { index: usize, n_modes: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operators live on different Hilbert spaces: {left:?} vs {right:?}")]
    SpaceMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("degenerate tunneling: J = 0 has no quadratic coupling limit")]
    DegenerateTunneling,

    #[error("singular pump response: gamma_c and Delta_a are both zero")]
    SingularPump,

    #[error("invalid mechanical frequency {omega}: must be positive")]
    InvalidFrequency { omega: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("phonon cutoff {cutoff} too small: b^2 vanishes identically below 3 levels")]
    CutoffTooSmall { cutoff: usize },

    #[error("negative collapse rate {rate}")]
    NegativeRate { rate: f64 },

    #[error("degenerate steady state: {detail} (second-smallest singular value: {sigma2:?})")]
    DegenerateSteadyState { detail: String, sigma2: Option<f64> },

    #[error("sparse factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("integrator failed to converge: achieved tolerance {achieved:e} over [0, {t}]")]
    IntegratorFailure { achieved: f64, t: f64 },

    #[error("cutoff convergence failed: {0}")]
    ConvergenceFailure(String),

    #[error("transmission undefined for epsilon = 0")]
    UndefinedTransmission,

    #[error("correlation undefined: mean occupation is zero")]
    UndefinedCorrelation,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
