use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{value} lies on the branch cut (-inf, 0] of the principal power")]
    BranchCutViolation { value: Complex64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("too few points: need at least {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    #[error("tail truncation criterion unreachable: {0}")]
    Truncation(String),

    #[error("another singularity lies too close to the contour (coefficient drift {drift:e})")]
    SingularityTooClose { drift: f64 },

    #[error("Laurent coefficient a_{0} is missing from the expansion")]
    MissingCoefficient(i64),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("matrix is not diagonalizable: {0}")]
    DefectiveMatrix(String),

    #[error("mild-solution residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("step size too large: contraction factor {factor} >= 1")]
    StepSizeTooLarge { factor: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
