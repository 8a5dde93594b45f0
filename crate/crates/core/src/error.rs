use thiserror::Error;

/// Errors produced by the geometry, alignment and benchmarking routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right} points")]
    LengthMismatch { left: usize, right: usize },

    #[error("vector of length {0} is too short; hyperbolic dimension must be at least 1")]
    TooShort(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("point is off the hyperboloid: |[x,x] + 1| = {residual:e}")]
    OffManifold { residual: f64 },

    #[error("point lies on the lower sheet (x0 = {0})")]
    LowerSheet(f64),

    #[error("point set is empty")]
    EmptySet,

    #[error("matrix is not orthogonal: max |U^T U - I| = {deviation:e}")]
    NotOrthogonal { deviation: f64 },

    #[error("matrix is not H-unitary: max |R^T H R - H| = {deviation:e}, R[0][0] = {corner}")]
    NotHUnitary { deviation: f64, corner: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("translation removal left off-block mass {0:e}")]
    FactorResidual(f64),

    #[error("point set is not centered: |mean P(x)| = {0:e}")]
    NotCentered(f64),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("point with norm {0} is outside the usable Poincare ball")]
    OutsideBall(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics themselves rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::FactorResidual(_) | Error::NotHUnitary { .. }
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => return Error::Io(io),
                other => return Error::Parse(format!("{other:?}")),
            }
        }
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            return Error::Io(e.into());
        }
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
