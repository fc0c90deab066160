//! Experiment runner: dataset loading, stratified splits, the four training
//! modes, metrics reports and the timing bench.

mod bench;
mod config;
mod data;
mod experiment;
mod model;

pub use bench::{bench, BenchRow, BenchTable};
pub use config::{parse_grid, ExperimentConfig, ExperimentMode};
pub use data::{
    feature_ranges, load_ionosphere, min_max_scale, parse_ionosphere, partition, split, split_indices,
    IONOSPHERE_FEATURES,
};
pub use experiment::{
    misclassification, run_experiment, run_experiment_detailed, ExperimentOutcome, MetricsReport, EVALUATION_PHASES,
    LIBRARY,
};
pub use model::{parse_rows, LabelledRows, SavedModel};

use thiserror::Error;

use crate::learners::LearnError;
use crate::netproto::NetError;
use crate::rado::RadoError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("data line {line}: {msg}")]
    Data { line: usize, msg: String },
    #[error("invalid setting: {0}")]
    Invalid(String),
    #[error("split: {0}")]
    Split(String),
    #[error("json: {0}")]
    Json(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Rado(#[from] RadoError),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |e| Self::Io(format!("{}: {e}", path.display()))
    }
}
