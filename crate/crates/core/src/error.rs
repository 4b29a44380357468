//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed schema or schema/data disagreement.
    #[error("schema error: {0}")]
    Schema(String),

    /// A row failed to parse; carries the 1-based data row number.
    #[error("load error at row {row}: {message}")]
    Load { row: usize, message: String },

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Splitting failure (e.g. no majority rows).
    #[error("split error: {0}")]
    Split(String),

    /// Transform fitting failure.
    #[error("fit error: {0}")]
    Fit(String),

    /// Transform application failure.
    #[error("transform error: {0}")]
    Transform(String),

    /// Dimension or shape disagreement.
    #[error("shape error: {0}")]
    Shape(String),

    /// Training aborted (e.g. non-finite loss).
    #[error("train error: {0}")]
    Train(String),

    /// Clustering failure.
    #[error("cluster error: {0}")]
    Cluster(String),

    /// Reporting or analysis failure.
    #[error("report error: {0}")]
    Report(String),

    /// Versioned artifact could not be read back.
    #[error("artifact error: {0}")]
    Artifact(String),
}

pub type Result<T> = std::result::Result<T, Error>;
