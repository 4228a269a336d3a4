use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid leader action: {0}")]
    InvalidAction(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sub-episode exceeded its step cap of {cap}")]
    StepCap { cap: usize },
    #[error("enumeration exceeds cap of {cap} ({what})")]
    SizeCap { cap: usize, what: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
