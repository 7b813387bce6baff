use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },

    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from ({col}, {row})")]
    NotSymmetric { row: usize, col: usize },

    #[error("imaginary part of the Riemann matrix is not positive definite")]
    ImaginaryPartNotPositiveDefinite,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("genus {genus} outside supported range 1..={max}")]
    GenusOutOfRange { genus: usize, max: usize },

    #[error("characteristic entries must be 0 or 1/2 and both vectors must have length {genus}")]
    InvalidCharacteristic { genus: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative request not supported: {0}")]
    UnsupportedDerivative(&'static str),

    #[error("truncation needs lattice radius {required} but the policy allows {max_radius}")]
    TruncationBudgetExceeded { required: usize, max_radius: usize },

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(&'static str),

    #[error("operation requires a genus-1 Riemann matrix, got genus {0}")]
    RequiresGenusOne(usize),

    #[error("point {re}{im:+}i lies on a lattice pole")]
    PoleAtLatticePoint { re: f64, im: f64 },

    #[error("degenerate fiber: {0}")]
    DegenerateFiber(String),

    #[error("bundle component {component} lies on the theta divisor (|theta| = {magnitude:e})")]
    OnThetaDivisor { component: usize, magnitude: f64 },

    #[error("kernel evaluated on the diagonal")]
    DiagonalPole,

    #[error("the sphere carries only the trivial degree-zero bundle; got z = {re}{im:+}i")]
    NontrivialBundleOnSphere { re: f64, im: f64 },

    #[error("test function does not live on this curve model")]
    CurveMismatch,

    #[error("invalid expansion parameters: {0}")]
    InvalidExpansion(String),

    #[error("aliasing detected: coefficient c{order} moved by {change:e} when doubling samples")]
    AliasingDetected { order: i32, change: f64 },

    #[error("theta zero is not simple (|theta'| = {derivative:e})")]
    ZeroNotSimple { derivative: f64 },

    #[error("root finding did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("sample too close to a singular locus: {0}")]
    SampleTooCloseToSingularity(String),

    #[error("composition sign calibration failed: {0}")]
    SignCalibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
