use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, WecanError>;

#[derive(Debug, Error)]
pub enum WecanError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("row {row}: self-loop on node {node}")]
    SelfLoop { row: usize, node: String },

    #[error("row {row}: weight is not a finite number")]
    NonFiniteWeight { row: usize },

    #[error("network has no edges")]
    EmptyNetwork,

    #[error("edge {edge}: {reason}")]
    InvalidEdge { edge: usize, reason: String },

    #[error("weight {weight} is outside the support of the {family} family")]
    OutOfSupport { weight: f64, family: &'static str },

    #[error("edge {edge}: non-finite log-density")]
    NonFiniteDensity { edge: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all {} restarts failed: {}", .0.len(), format_failures(.0))]
    AllRestartsFailed(Vec<(u64, String)>),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Write(#[from] std::io::Error),
}

fn format_failures(failures: &[(u64, String)]) -> String {
    failures
        .iter()
        .map(|(seed, cause)| format!("seed {seed}: {cause}"))
        .collect::<Vec<_>>()
        .join("; ")
}
