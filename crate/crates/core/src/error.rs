use thiserror::Error;

/// Errors raised by the Fourier-Taylor series algebra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("dimension mismatch: left is (n={0}, m={1}), right is (n={2}, m={3})")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("unsupported dimensions n={n}, m={m}: need n >= 1 and 16n + 12m <= 128")]
    UnsupportedDims { n: usize, m: usize },
    #[error("multi-index out of packable range (|k_i| <= 511, degrees <= 63)")]
    IndexOverflow,
    #[error("vector length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("variable index {index} out of range for {kind} (dimension {dim})")]
    InvalidVariable {
        kind: &'static str,
        index: usize,
        dim: usize,
    },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid norm weights r={r}, s={s}: need 0 < r and 0 < s")]
    InvalidWeights { r: f64, s: f64 },
}

/// Errors from the normal-form model, charts and condition checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("condition A0 violated at y = {y:?}: {reason}")]
    A0Violated { y: Vec<f64>, reason: String },
    #[error("parameter {lambda:?} lies outside the chart domain")]
    OutsideDomain { lambda: Vec<f64> },
    #[error("parameter {lambda:?} is closer than {margin} to the domain boundary")]
    TooCloseToBoundary { lambda: Vec<f64>, margin: f64 },
    #[error("no nonsingular {d}x{d} principal minor found")]
    NoPrincipalMinor { d: usize },
    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("polynomial expression error at column {col}: {msg}")]
    Expression { col: usize, msg: String },
    #[error("scenario file error: {0}")]
    ScenarioFile(String),
}

/// Errors from the homological equation solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("resonant divisor at k={k:?}, class {class}: margin {margin:e} <= floor {floor:e}")]
    ResonantDivisor {
        k: Vec<i32>,
        class: &'static str,
        margin: f64,
        floor: f64,
    },
    #[error("normal Hessian M is singular: zero-mode equation has no solution")]
    SingularM,
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Errors raised by a KAM step or the iteration driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KamError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("hypothesis {which} failed: lhs {lhs:e} vs rhs {rhs:e}")]
    Hypothesis {
        which: &'static str,
        lhs: f64,
        rhs: f64,
    },
    #[error("Lie series diverging: order {order} term norm {norm:e} did not decrease")]
    LieDivergence { order: usize, norm: f64 },
    #[error("next perturbation scale {scale:e} is below the floating-point range")]
    ScaleUnderflow { scale: f64 },
    #[error("principal minor is singular; translation impossible")]
    SingularMinor,
}

/// Errors from the dynamical verifier.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("integration step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("inverse chain flow failed on link {link}: {reason}")]
    InverseChain { link: usize, reason: String },
    #[error("invalid verification input: {0}")]
    Input(String),
}
