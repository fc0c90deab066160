use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentMode};
use super::experiment::run_experiment;
use super::HarnessError;
use crate::rado::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: ExperimentMode,
    pub peers: usize,
    pub rados_per_peer: usize,
    pub key_bits: u64,
    pub fraction_bits: u32,
    /// Training time, evaluation excluded.
    pub train_seconds: f64,
    pub misclassification: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<18} {:>5} {:>6} {:>8} {:>4} {:>12} {:>8}\n",
            "mode", "peers", "rados", "key_bits", "f", "train_s", "error"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<18} {:>5} {:>6} {:>8} {:>4} {:>12.4} {:>8.4}",
                r.mode.name(),
                r.peers,
                r.rados_per_peer,
                r.key_bits,
                r.fraction_bits,
                r.train_seconds,
                r.misclassification
            );
        }
        out
    }

    /// Fastest encrypted run over slowest plain rado run, when both exist.
    pub fn encrypted_over_plain(&self) -> Option<f64> {
        let plain = self
            .rows
            .iter()
            .filter(|r| r.mode == ExperimentMode::RadoPlain)
            .map(|r| r.train_seconds)
            .reduce(f64::max)?;
        let enc = self
            .rows
            .iter()
            .filter(|r| r.mode.is_encrypted())
            .map(|r| r.train_seconds)
            .reduce(f64::min)?;
        Some(enc / plain.max(f64::MIN_POSITIVE))
    }

    /// Only the ordering is checked, never absolute times.
    pub fn check_ordering(&self, min_ratio: f64) -> Result<(), HarnessError> {
        match self.encrypted_over_plain() {
            Some(r) if r >= min_ratio => Ok(()),
            Some(r) => Err(HarnessError::Invalid(format!(
                "encrypted runs are only {r:.1}x slower than plain, expected {min_ratio}x"
            ))),
            None => Err(HarnessError::Invalid("grid needs a plain and an encrypted run".into())),
        }
    }
}

/// Runs every grid entry in turn.
pub fn bench(grid: &[ExperimentConfig], data: &Dataset<f64>) -> Result<BenchTable, HarnessError> {
    let mut table = BenchTable::default();
    for cfg in grid {
        let report = run_experiment(cfg, data)?;
        table.rows.push(BenchRow {
            mode: cfg.mode,
            peers: cfg.peers,
            rados_per_peer: cfg.rados_per_peer,
            key_bits: cfg.key_bits,
            fraction_bits: cfg.fraction_bits,
            train_seconds: report.training_seconds(),
            misclassification: report.misclassification,
        });
    }
    Ok(table)
}
