use thiserror::Error;

/// Errors raised by the toolkit. Each variant names the module that failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("empty Γ: boundary selection matched no edges")]
    EmptyGamma,
    #[error("coeff: {0}")]
    Coefficient(String),
    #[error("forward: {0}")]
    Forward(String),
    #[error("forward: singular factorization at pivot {pivot} (inadmissible coefficient or broken mesh)")]
    Singular { pivot: usize },
    #[error("ndmap: {0}")]
    NdMap(String),
    #[error("mono: {0}")]
    Mono(String),
    #[error("locpot: {0}")]
    Locpot(String),
    #[error("verify: {0}")]
    Verify(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
