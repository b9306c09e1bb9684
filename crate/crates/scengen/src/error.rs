use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("cost scenario count must be even, got {0}")]
    OddSampleCount(usize),
    #[error("ill-conditioned quadrature: {0}")]
    IllConditioned(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
