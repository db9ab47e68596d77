use thiserror::Error;

/// Errors raised by the geometry kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain (axis {axis}, margin {margin:e})")]
    PointOutsideDomain {
        point: Vec<f64>,
        axis: usize,
        margin: f64,
    },
    #[error("metric is not positive definite at {point:?}: pivot {pivot} = {value:e}")]
    NotPositiveDefinite {
        point: Vec<f64>,
        pivot: usize,
        value: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vectors are not an orthonormal pair (Gram deviation {deviation:e})")]
    NonOrthonormalPair { deviation: f64 },
    #[error("vector is not contained in the subspace (residual {residual:e})")]
    VectorNotInSubspace { residual: f64 },
    #[error("subspace of dimension {dim} is trivial or fills the tangent space of dimension {ambient}")]
    TrivialSubspace { dim: usize, ambient: usize },
    #[error("conformal factor {index} is not positive at {point:?} (value {value:e})")]
    NonPositiveFactor {
        index: usize,
        point: Vec<f64>,
        value: f64,
    },
    #[error("invalid conformal data: {0}")]
    InvalidConformalData(String),
    #[error("unsupported dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: String },
    #[error("geodesic path check failed: {0}")]
    PathCheck(String),
    #[error("integration step failed at s = {s}: {reason}")]
    StepFailure { s: f64, reason: String },
    #[error("insufficient samples: {got} (need at least {need})")]
    InsufficientSamples { got: usize, need: usize },
    #[error("inadmissible bound specification: {0}")]
    InadmissibleSpec(String),
    #[error("test function does not vanish at the path ends ({start:e}, {end:e})")]
    PhiBoundaryNonzero { start: f64, end: f64 },
    #[error("embedding differential is rank deficient at {param:?}")]
    RankDeficient { param: Vec<f64> },
    #[error("trace of the second fundamental form is {trace:e}, expected zero")]
    NonzeroTrace { trace: f64 },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },
    #[error("first eigenfunction changes sign at node {node}")]
    EigenfunctionNotPositive { node: usize },
    #[error("normal frame is not globally defined: {0}")]
    FrameNotGlobal(String),
    #[error("no admissible ODE constant found; worst node t = {worst_t} (margin {margin:e})")]
    NoAdmissibleConstant { worst_t: f64, margin: f64 },
    #[error("neck certification failed at r = {r}: value {value:e}")]
    CertificationFailure { r: f64, value: f64 },
    #[error("chart lacks a polar structure around the neck point")]
    NoPolarStructure,
    #[error("invalid blend window: {0}")]
    InvalidWindow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Manifest(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
