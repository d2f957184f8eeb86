use thiserror::Error;

/// Errors raised by geometry, mass evaluation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MassError {
    #[error("vectors are linearly dependent (relative residual {residual:e})")]
    RankDeficient { residual: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("half-flat does not live on the measure's carrier")]
    CarrierMismatch,
    #[error("measure has no mass")]
    ZeroMass,
    #[error("operation not supported for {0} assignments")]
    UnsupportedKind(&'static str),
    #[error("cut direction is orthogonal to the flat being cut")]
    DegenerateDirection,
    #[error("region is empty")]
    EmptyRegion,
    #[error("line is orthogonal to the sweep direction")]
    OrthogonalLine,
    #[error("hyperplane normal is orthogonal to the vertical axis")]
    VerticalNormalDegenerate,
    #[error("dimension {0} is odd")]
    OddDimension(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, MassError>;

/// Failure of a zero search.
///
/// `NotConverged` keeps the best candidate found so callers can still report it.
#[derive(Debug, Clone, Error)]
pub enum SolveError<T: std::fmt::Debug> {
    #[error("no zero found; best residual {residual:e}")]
    NotConverged { best: Box<T>, residual: f64 },
    #[error(transparent)]
    Problem(#[from] MassError),
}

impl<T: std::fmt::Debug> SolveError<T> {
    /// The best candidate, if the search ran at all.
    pub fn best(&self) -> Option<&T> {
        match self {
            SolveError::NotConverged { best, .. } => Some(best),
            SolveError::Problem(_) => None,
        }
    }
}
