use thiserror::Error;

/// Errors raised by the geometry, flow, spectral, estimate and heat layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("degenerate pole at x = {x}: |dpsi/ds| = {slope} (expected 1)")]
    DegeneratePole { x: f64, slope: f64 },

    #[error("point outside the manifold parameterization: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("step crossed the singularity: psi <= 0 at interior node {node}")]
    SingularityCrossed { node: usize },

    #[error("numerical instability: non-finite value at node {node}")]
    Instability { node: usize },

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64, last_lambda: f64 },

    #[error("time window [{start}, {end}] is not covered by checkpoints [{first}, {last}]")]
    Coverage { start: f64, end: f64, first: f64, last: f64 },

    #[error("trajectory has no singular time estimate")]
    NeedsSingularTime,

    #[error("cut-off construction failed at d = {distance}, t = {time}: {reason}")]
    CutoffFailed { distance: f64, time: f64, reason: String },

    #[error("heat solver failed: {0}")]
    Solver(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
