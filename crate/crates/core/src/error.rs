use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
