use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {0} is isolated")]
    IsolatedVertex(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("point is outside the domain: {0}")]
    OutsideDomain(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("proximal candidate vanished; inner solver gap {gap:e}")]
    VanishingCandidate { gap: f64 },

    #[error("no constraint directions left: all {0} modes already computed")]
    EmptyConstraintSpace(usize),

    #[error("community graph still disconnected after {0} attempts")]
    Disconnected(usize),

    #[error("all {0} starts failed")]
    AllStartsFailed(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
