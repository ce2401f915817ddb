use thiserror::Error;

/// Errors raised by the solver and its supporting machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch between operands")]
    GeometryMismatch,

    #[error("Dirac operator has a {kernel_dim}-dimensional kernel; operation needs a kernel-free spin structure")]
    KernelPresent { kernel_dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exponential overflow guard tripped: max(u) = {max_u:.6e}")]
    Overflow { max_u: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("rho = {rho} lies within gap_tol = {gap_tol:e} of the Dirac spectrum (nearest eigenvalue {nearest})")]
    CouplingOnSpectrum { rho: f64, nearest: f64, gap_tol: f64 },

    #[error("rho = {rho} is outside the {regime} regime: {detail}")]
    Regime {
        rho: f64,
        regime: &'static str,
        detail: String,
    },

    #[error("no admissible constants: {0}")]
    Infeasible(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e}; {detail})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        detail: String,
    },

    #[error("singular system in {what}: {detail}")]
    Singular { what: &'static str, detail: String },

    #[error("path collapsed: max level {level} is within tolerance of the trivial level {trivial}")]
    PathCollapse { level: f64, trivial: f64 },

    #[error("boundary violation: boundary node {node} has J = {value} >= {bound}")]
    BoundaryViolation { node: usize, value: f64, bound: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("field dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
