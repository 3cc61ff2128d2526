use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0} vs {1} points per axis")]
    GridMismatch(usize, usize),

    #[error("non-finite value {value} in {what} at node ({i}, {j})")]
    NonFinite {
        what: &'static str,
        i: usize,
        j: usize,
        value: f64,
    },

    #[error("vacuum/blow-up: sigma = {value} at node ({i}, {j}) leaves the admissible range")]
    Vacuum { i: usize, j: usize, value: f64 },

    #[error("non-positive density {value} at node ({i}, {j})")]
    NonPositiveDensity { i: usize, j: usize, value: f64 },

    #[error("invalid equation of state: {0}")]
    InvalidEos(String),

    #[error("state is rotational (max |curl u| = {max_curl:e}); the potential equation needs curl u = 0")]
    Rotational { max_curl: f64 },

    #[error("order {requested} exceeds the configured cap {cap}: {reason}")]
    OrderTooLarge {
        requested: usize,
        cap: usize,
        reason: &'static str,
    },

    #[error("time derivative not available: {0}")]
    NotClosed(&'static str),

    #[error("insufficient forcing snapshots: {0}")]
    InsufficientSnapshots(String),

    #[error("ratio undefined for zero data")]
    ZeroData,

    #[error("power-law fit needs at least 3 finite points, got {0}")]
    TooFewPoints(usize),

    #[error("initial-data normalization did not converge after {iterations} iterations (last iterates: {last:?})")]
    Normalization { iterations: usize, last: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("CSV parse error at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
