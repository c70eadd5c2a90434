//! Experiment harness: configuration, drivers for the verification experiments,
//! persistence and the verdict report.

// NaN must fail validation, so guards are written as !(x > 0.0).
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod experiments;
pub mod io;
pub mod report;

pub use config::ExperimentConfig;
pub use experiments::Context;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nf_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl LabError {
    /// 2 for bad input, 3 for a computation that could not finish.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Io(_) | LabError::Json(_) => 2,
            LabError::Core(nf_core::Error::InvalidInput(_)) => 2,
            LabError::Core(_) | LabError::Csv(_) => 3,
        }
    }
}
