use thiserror::Error;

/// Errors reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("kernel singular at z = 0")]
    Singularity,
    #[error("missing exterior model")]
    MissingExterior,
    #[error("boundary stencil incomplete under exterior_field model")]
    IncompleteStencil,
    #[error("non-periodic grid: {0}")]
    NotPeriodic(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("instability: energy increased for {steps} consecutive steps")]
    Instability { steps: usize, energy_trace: Vec<f64> },
    #[error("flow error: {0}")]
    Flow(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
