use thiserror::Error;

/// Errors produced by the spline, assembly, surrogate and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spline degree must be at least 1, got {0}")]
    InvalidDegree(usize),

    #[error("element count must be at least 1, got {0}")]
    InvalidElementCount(usize),

    #[error("dimension must be 2 or 3, got {0}")]
    InvalidDimension(usize),

    #[error("parameter {value} lies outside the reference domain [0, 1]")]
    OutOfDomain { value: f64 },

    #[error("mesh too coarse for surrogate: nel = {nel} must exceed {bound} for degree {degree}")]
    MeshTooCoarse { nel: usize, degree: usize, bound: usize },

    #[error("singular geometry Jacobian (|det| = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unknown geometry `{0}`")]
    UnknownGeometry(String),

    #[error("quadrature point count must be in 1..=10, got {0}")]
    QuadratureOrder(usize),

    #[error("element index {index:?} out of range for {nel} elements per direction")]
    InvalidElement { index: Vec<usize>, nel: usize },

    #[error("skip parameter must be at least 1")]
    InvalidSkip,

    #[error("interpolation degree must be 1 or 3, got {0}")]
    InvalidInterpDegree(usize),

    #[error("too few samples for interpolation degree {degree}: {count} per direction")]
    TooFewSamples { count: usize, degree: usize },

    #[error("sample coordinates must be strictly increasing")]
    NonMonotoneCoords,

    #[error("extrapolation requested at {value} outside [{lo}, {hi}]")]
    Extrapolation { value: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error stems from invalid user input rather than a
    /// numerical failure during the run.
    pub fn is_config_error(&self) -> bool {
        !matches!(
            self,
            Error::SingularJacobian { .. } | Error::NotConverged { .. } | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
