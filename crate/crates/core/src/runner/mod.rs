//! Experiment grid execution.
//!
//! Each cell trains a baseline on the training range, then walks every test
//! origin in order: forecast seven days from data before the origin, log the
//! forecast against the truth, and for online cells fold the origin day's
//! observations into the model. Single-output cells keep one model per
//! station and advance stations in parallel.
//!
//! Online neural updates replay the `online_window` most recent windows
//! whose targets are fully observed. ARIMA and SARIMA re-estimate their
//! fixed order on the extended series, warm-started from the previous fit.
//!
//! The static strategy trains on the training range only (the paper's
//! wording, "estimates a model using only the test data", reads as a slip
//! for training data).

mod config;
mod execute;
mod log;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_output, ExperimentConfig, GridSpec, Hyperparameters, ModelFamily, Schedule, Strategy};
pub use execute::{run_experiment, run_grid, AuditReport, ExperimentRun, RunOptions};
pub use log::{
    measure_timing, read_timing_csv, write_timing_csv, ForecastLog, ForecastRecord, Incident, TimingReport,
    TimingSamples,
};

use crate::data::DataError;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{experiment}: {message}")]
    Model { experiment: String, message: String },
    #[error("{experiment}: log incomplete: {}", problems.join("; "))]
    Incomplete { experiment: String, problems: Vec<String> },
    #[error("{experiment}: stopped after {completed} of {total} origins")]
    Interrupted {
        experiment: String,
        completed: usize,
        total: usize,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = RunnerError> = std::result::Result<T, E>;
