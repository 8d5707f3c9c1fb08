use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix {0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("matrix {0} is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("point is (nearly) antipodal to the origin: (u,u0)/mu = {0}")]
    AntipodalPoint(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("point outside the admissible ball: distance {distance} >= {radius}")]
    PreconditionOutOfBall { distance: f64, radius: f64 },
    #[error("unsupported parameter dimension {0} (only 1 and 2)")]
    UnsupportedDimension(usize),
    #[error("frame transport failed: {0}")]
    FrameTransportFailure(String),
    #[error("cover construction failed: {0}")]
    CoverFailure(String),
    #[error("negative frame has dimension {got}, need at least {need}")]
    FrameDimensionTooSmall { need: usize, got: usize },
    #[error("first-order deformation stalled at node {node}: value {value} above target {target}")]
    SlowDecrease { node: usize, value: f64, target: f64 },
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("mountain-pass geometry failure: {0}")]
    GeometryFailure(String),
    #[error("bounded path selection failed: {0}")]
    SelectionFailure(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("functional does not declare modulus invariance")]
    NotModulusInvariant,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::DimensionMismatch { .. }
            | Error::NotSymmetric(_)
            | Error::NotPositiveDefinite(_)
            | Error::Json(_) => 2,
            Error::GeometryFailure(_) | Error::AntipodalPoint(_) => 3,
            Error::Certification(_)
            | Error::HypothesisViolated(_)
            | Error::PreconditionOutOfBall { .. }
            | Error::SelectionFailure(_)
            | Error::SlowDecrease { .. }
            | Error::FrameDimensionTooSmall { .. }
            | Error::FrameTransportFailure(_)
            | Error::CoverFailure(_)
            | Error::NotModulusInvariant => 4,
            Error::NoConvergence(_) | Error::BudgetExceeded(_) => 5,
            Error::UnsupportedDimension(_) | Error::Eigen(_) | Error::Io(_) => 1,
        }
    }
}
