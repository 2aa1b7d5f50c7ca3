//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DdtError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("region error: {0}")]
    Region(String),

    #[error("criterion error: {0}")]
    Criterion(String),

    #[error("split search error: {0}")]
    Split(String),

    #[error("all candidate splits are uninformative")]
    Uninformative,

    #[error("stability error: {0}")]
    Stability(String),

    #[error("induction error: {0}")]
    Induction(String),

    #[error("explanation error: {0}")]
    Explanation(String),

    #[error("teacher error: {0}")]
    Teacher(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DdtError>;
