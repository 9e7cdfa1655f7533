//! Crate-wide error type. Variants map onto the distinct failure classes the
//! CLI reports with separate exit codes, so keep them coarse and stable.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A sample, model, or dataset disagrees about the feature dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A caller-supplied value is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// No strictly feasible point exists (or none was found) for a
    /// constrained fit; the message names the failing condition.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The iteration budget ran out before tolerances were met.
    #[error("did not converge: {0}")]
    NotConverged(String),

    /// A scorer produced NaN or infinity during a sequential run.
    #[error("non-finite score at sample {index} of a sequential run")]
    NonFiniteScore { index: usize },

    /// Every Monte Carlo trial hit the truncation cap, so boundary-crossing
    /// statistics are undefined.
    #[error("all {trials} trials truncated at n_max = {n_max}")]
    AllTruncated { trials: usize, n_max: usize },

    /// A text input (dataset CSV, feature/label file) failed to parse; the
    /// location is 1-based.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
