use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("assembly error in block {block}: {detail}")]
    Assembly { block: String, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate critical level at theta = {theta:.6}: |f''| = {hessian:.3e}")]
    Degenerate { theta: f64, hessian: f64 },

    #[error("unknown catalog case `{0}`")]
    UnknownCase(String),

    #[error("invalid backend: {identity} residual {residual:.3e} exceeds {tolerance:.3e}")]
    InvalidBackend {
        identity: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("solver did not converge after {iterations} iterations (max residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error(
        "ambiguous kernel in degree {degree}: largest kernel eigenvalue {kernel_max:.3e} vs gap {gap:.3e}; increase N or the eigenvalue count"
    )]
    AmbiguousKernel {
        degree: usize,
        kernel_max: f64,
        gap: f64,
    },

    #[error("trace tail bound {bound:.3e} exceeds 1e-6; request more eigenvalues")]
    TraceTail { bound: f64 },

    #[error("kernel dimension changed along the s sweep ({dims:?}); N too small for the largest s")]
    SweepKernel { dims: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, Error>;
