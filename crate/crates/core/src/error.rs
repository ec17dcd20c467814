use thiserror::Error;

/// Errors raised by the laboratory operators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported dimension {dim}: {context}")]
    UnsupportedDimension { dim: usize, context: &'static str },

    #[error("unsupported differential order {order} (maximum {max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent kernel: |x|^-{alpha} is not locally integrable in dimension {dim}")]
    DivergentKernel { alpha: f64, dim: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("placement error: {0}")]
    Placement(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid weight: {0}")]
    Weight(String),

    #[error("problem too large: {0}")]
    Size(String),

    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("interior block is singular: zero is a Dirichlet eigenvalue of the perturbed operator ({0})")]
    DirichletEigenvalue(String),

    #[error("geodesic trapped: no boundary exit before parameter {max_parameter}")]
    Trapping { max_parameter: f64 },

    #[error("shooting did not converge: {0}")]
    Nonconvergence(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("not a Finsler norm: dual norm of beta reaches {dual_norm:.4} (must stay below 1)")]
    NotFinsler { dual_norm: f64 },

    #[error("one-form is not closed (discrete curl {curl:.3e})")]
    NotClosed { curl: f64 },

    #[error("flow outside the first-order regime: |W|/c reaches {ratio:.3} (limit 0.1)")]
    PerturbationRegime { ratio: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
