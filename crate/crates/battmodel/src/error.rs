use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("inconsistent indexing: {0}")]
    InconsistentIndexing(String),
    #[error("grant of {requested} t/y exceeds installable capacity {available} t/y in zone {zone}")]
    InfeasibleGrant { requested: f64, available: f64, zone: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Apwl(#[from] apwl::ApwlError),
}
