//! Cohort preprocessing, acuity phenotyping, evaluation metrics, probability
//! calibration, post-hoc analyses, and a synthetic ICU cohort generator.
//!
//! Everything in this crate operates on plain admission records: irregular
//! timestamped events, therapy intervals, transfusions, a static profile,
//! and a disposition. The model crate consumes the prepared tensors; this
//! crate owns everything before and after the network.

pub mod analyze;
pub mod calibrate;
pub mod cohort;
pub mod io;
pub mod metrics;
pub mod phenotype;
pub mod synth;
pub mod types;

pub use types::*;

/// Error type shared across the data-side modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Malformed { path: String, msg: String },
    #[error("data: {0}")]
    Data(String),
    #[error("phenotype: {0}")]
    Phenotype(String),
    #[error("metric: {0}")]
    Metric(String),
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("synth: {0}")]
    Synth(String),
}
