use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentMode};
use super::data::{feature_ranges, min_max_scale, partition, split};
use super::HarnessError;
use crate::learners::{fit_logistic, predict, GradientConfig};
use crate::netproto::{plain_reference, run_train, ClassifyMode, PeerInput, Session};
use crate::rado::{Dataset, Label};

pub const LIBRARY: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Phases that are evaluation rather than training.
pub const EVALUATION_PHASES: [&str; 2] = ["evaluate", "classify"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub misclassification: f64,
    pub phase_seconds: BTreeMap<String, f64>,
    pub config: ExperimentConfig,
    pub library: String,
    /// SHA-256 over the library version, the config, the data split and the
    /// learned weights. Stable across same-seed reruns.
    pub digest: String,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let r: Self = serde_json::from_str(text).map_err(|e| HarnessError::Json(e.to_string()))?;
        if !(0.0..=1.0).contains(&r.misclassification) {
            return Err(HarnessError::Invalid(format!(
                "misclassification {} is outside [0, 1]",
                r.misclassification
            )));
        }
        r.config.validate()?;
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json()).map_err(HarnessError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path).map_err(HarnessError::io(path))?)
    }

    /// Seconds spent training, without evaluation.
    pub fn training_seconds(&self) -> f64 {
        self.phase_seconds
            .iter()
            .filter(|(k, _)| !EVALUATION_PHASES.contains(&k.as_str()))
            .map(|(_, v)| v)
            .sum()
    }
}

/// `#wrong / #total`; zero for an empty set.
pub fn misclassification(predicted: &[Label], truth: &[Label]) -> Result<f64, HarnessError> {
    if predicted.len() != truth.len() {
        return Err(HarnessError::Invalid(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Everything a run produced, for callers that need more than the report.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    /// Weights over the training features (plus the intercept, if any). For
    /// encrypted modes this is the decrypted model, revealed for evaluation.
    pub theta: Vec<f64>,
    pub predictions: Vec<Label>,
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
    /// Training-set feature ranges, when min-max scaling is on.
    pub ranges: Option<Vec<(f64, f64)>>,
    /// The protocol run, for encrypted modes.
    pub session: Option<Session>,
}

pub fn run_experiment(cfg: &ExperimentConfig, data: &Dataset<f64>) -> Result<MetricsReport, HarnessError> {
    Ok(run_experiment_detailed(cfg, data)?.report)
}

/// Splits, trains in the configured mode and scores the held-out set.
///
/// Encrypted modes score every test example through the partitioned
/// classification protocol, with the querying peer rotating over the peers.
pub fn run_experiment_detailed(cfg: &ExperimentConfig, data: &Dataset<f64>) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let (mut train, mut test) = split(data, cfg.split_ratio, cfg.seed)?;
    let ranges = cfg.min_max_scale.then(|| feature_ranges(&train));
    if let Some(r) = &ranges {
        train = min_max_scale(&train, r)?;
        test = min_max_scale(&test, r)?;
    }
    let with_intercept = |ds: &Dataset<f64>| if cfg.intercept { ds.with_intercept() } else { ds.clone() };
    let mut phases = BTreeMap::new();
    let mut session = None;
    let (theta, predictions) = match cfg.mode {
        ExperimentMode::BaselineLogistic => {
            let t = Instant::now();
            let (model, _) = fit_logistic(&with_intercept(&train), &GradientConfig::default(), cfg.logistic_l2)?;
            phases.insert("fit".to_string(), t.elapsed().as_secs_f64());
            let t = Instant::now();
            let preds = central_predictions(&model.theta, &with_intercept(&test))?;
            phases.insert("evaluate".to_string(), t.elapsed().as_secs_f64());
            (model.theta, preds)
        }
        ExperimentMode::RadoPlain => {
            let t = Instant::now();
            let peers = partition(&train, cfg.peers)?;
            let theta = plain_reference(&peers, &cfg.train_config())?;
            phases.insert("train".to_string(), t.elapsed().as_secs_f64());
            let t = Instant::now();
            let preds = central_predictions(&theta, &with_intercept(&test))?;
            phases.insert("evaluate".to_string(), t.elapsed().as_secs_f64());
            (theta, preds)
        }
        ExperimentMode::RadoEncRados | ExperimentMode::RadoEncFull => {
            let inputs: Vec<PeerInput<f64>> = partition(&train, cfg.peers)?
                .into_iter()
                .map(PeerInput::Numeric)
                .collect();
            let mut s = run_train(&inputs, &cfg.train_config())?;
            phases.extend(s.report().phase_seconds.clone());
            let t = Instant::now();
            let preds = test
                .examples()
                .iter()
                .enumerate()
                .map(|(i, e)| s.classify(i % cfg.peers, &e.x, ClassifyMode::Partitioned))
                .collect::<Result<Vec<_>, _>>()?;
            phases.insert("classify".to_string(), t.elapsed().as_secs_f64());
            let theta = s.reveal_theta()?;
            session = Some(s);
            (theta, preds)
        }
    };
    let rate = misclassification(&predictions, &test.labels())?;
    let report = MetricsReport {
        misclassification: rate,
        phase_seconds: phases,
        config: cfg.clone(),
        library: LIBRARY.to_string(),
        digest: digest(cfg, &train, &test, &theta),
    };
    Ok(ExperimentOutcome {
        report,
        theta,
        predictions,
        train,
        test,
        ranges,
        session,
    })
}

fn central_predictions(theta: &[f64], ds: &Dataset<f64>) -> Result<Vec<Label>, HarnessError> {
    Ok(ds
        .examples()
        .iter()
        .map(|e| predict(theta, &e.x))
        .collect::<Result<Vec<_>, _>>()?)
}

fn digest(cfg: &ExperimentConfig, train: &Dataset<f64>, test: &Dataset<f64>, theta: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update(LIBRARY.as_bytes());
    h.update(cfg.to_kv().as_bytes());
    for ds in [train, test] {
        for e in ds.examples() {
            for v in &e.x {
                h.update(v.to_le_bytes());
            }
            h.update([e.y.as_i8() as u8]);
        }
    }
    for v in theta {
        h.update(v.to_le_bytes());
    }
    format!("{:x}", h.finalize())
}
