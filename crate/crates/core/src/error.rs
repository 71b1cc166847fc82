use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block structure: {0}")]
    Validation(String),
    #[error("block B_{block} has rank {rank}, expected full row rank {expected}")]
    RankDeficient {
        block: usize,
        rank: usize,
        expected: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("vector is not supported on layer {layer}")]
    NotInLayer { layer: usize },
    #[error("Hörmander condition fails (Kalman rank {rank} < {n})")]
    NotHormander { rank: usize, n: usize },
    #[error("kernel undefined at t = {t}: covariance is singular")]
    KernelUndefined { t: f64 },
    #[error("support of the field overflows the grid on axis {axis}")]
    SupportOverflow { axis: usize },
    #[error("point lies outside the grid box on axis {axis}")]
    OutOfBox { axis: usize },
    #[error("finite-difference stencil leaves the grid")]
    StencilOutOfBounds,
    #[error("derivative not available: {0}")]
    Unsupported(String),
    #[error("missing Taylor coefficient for k={k}, beta={beta:?}")]
    MissingCoefficient { k: usize, beta: Vec<usize> },
    #[error("{0}")]
    Degenerate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
