use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentMode};
use super::data::{min_max_scale, partition};
use super::experiment::ExperimentOutcome;
use super::HarnessError;
use crate::learners::{Classifier, ClassifierMeta};
use crate::netproto::{ClassifyMode, Session};
use crate::rado::{Dataset, Label, LiftMap};

/// What `classify` needs from a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub config: ExperimentConfig,
    pub theta: Vec<f64>,
    /// Per-peer feature presence, including the intercept column if any.
    pub presence: Vec<Vec<bool>>,
    pub ranges: Option<Vec<(f64, f64)>>,
    /// The retained training rado, for surrogate classification.
    pub extra_rado: Option<Vec<f64>>,
    pub digest: String,
}

impl SavedModel {
    pub fn from_outcome(outcome: &ExperimentOutcome) -> Result<Self, HarnessError> {
        let cfg = &outcome.report.config;
        let (presence, extra_rado) = match (&outcome.session, cfg.mode) {
            (Some(s), _) => (s.presence(), s.reveal_extra_rado()?),
            (None, ExperimentMode::BaselineLogistic) => (vec![vec![true; outcome.theta.len()]], None),
            (None, _) => {
                let presence = partition(&outcome.train, cfg.peers)?
                    .iter()
                    .map(|ds| {
                        let mut f = ds.feature_presence();
                        if cfg.intercept {
                            f.push(true);
                        }
                        f
                    })
                    .collect();
                (presence, None)
            }
        };
        Ok(Self {
            config: cfg.clone(),
            theta: outcome.theta.clone(),
            presence,
            ranges: outcome.ranges.clone(),
            extra_rado,
            digest: outcome.report.digest.clone(),
        })
    }

    /// Writes `config.txt`, `theta.csv`, `classifier.json` and `model.json`.
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        let meta = ClassifierMeta {
            dim: self.theta.len(),
            feature_map: LiftMap::identity(self.theta.len()),
            config_digest: self.digest.clone(),
        };
        Classifier::new(self.theta.clone()).save(dir, &meta)?;
        let config = dir.join("config.txt");
        fs::write(&config, self.config.to_kv()).map_err(HarnessError::io(&config))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Json(e.to_string()))?;
        let path = dir.join("model.json");
        fs::write(&path, json).map_err(HarnessError::io(&path))
    }

    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join("model.json");
        let text = fs::read_to_string(&path).map_err(HarnessError::io(&path))?;
        let model: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Json(e.to_string()))?;
        let (classifier, meta) = Classifier::<f64>::load(dir)?;
        if classifier.theta != model.theta || meta.config_digest != model.digest {
            return Err(HarnessError::Invalid("theta.csv does not match model.json".into()));
        }
        Ok(model)
    }

    /// Features per example before the intercept.
    pub fn feature_dim(&self) -> usize {
        self.theta.len() - self.config.intercept as usize
    }

    /// Scores each row for peer `querying` through the classification
    /// protocol, under a fresh key pair.
    pub fn classify(&self, rows: &[Vec<f64>], mode: ClassifyMode, querying: usize) -> Result<Vec<Label>, HarnessError> {
        let mut cfg = self.config.train_config();
        cfg.key_bits = cfg.key_bits.max(128);
        let mut session = Session::with_plain_theta(&cfg, self.presence.clone(), &self.theta)?;
        if let Some(r) = &self.extra_rado {
            session.set_plain_extra_rado(r)?;
        }
        let rows = match &self.ranges {
            Some(ranges) => {
                let labels = vec![Label::Positive; rows.len()];
                let ds = min_max_scale(&Dataset::from_rows(rows.to_vec(), labels)?, ranges)?;
                ds.examples().iter().map(|e| e.x.clone()).collect()
            }
            None => rows.to_vec(),
        };
        let labels = rows
            .iter()
            .map(|x| session.classify(querying, x, mode))
            .collect::<Result<Vec<_>, _>>()?;
        session
            .audit()
            .check()
            .map_err(|v| HarnessError::Invalid(v.to_string()))?;
        Ok(labels)
    }
}

/// Query rows and, when every row carries one, their classes.
pub type LabelledRows = (Vec<Vec<f64>>, Option<Vec<Label>>);

/// Feature rows, each optionally followed by a class (`g`/`b` or `+1`/`-1`).
pub fn parse_rows(text: &str, dim: usize) -> Result<LabelledRows, HarnessError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| HarnessError::Data { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim && fields.len() != dim + 1 {
            return Err(bad(format!("expected {dim} features, found {} fields", fields.len())));
        }
        let x = fields[..dim]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(class) = fields.get(dim) {
            labels.push(match *class {
                "g" | "+1" | "1" => Label::Positive,
                "b" | "-1" => Label::Negative,
                other => return Err(bad(format!("unknown class {other:?}"))),
            });
        }
        rows.push(x);
    }
    match labels.len() {
        0 => Ok((rows, None)),
        n if n == rows.len() => Ok((rows, Some(labels))),
        _ => Err(HarnessError::Data {
            line: 0,
            msg: "either every row has a class or none does".into(),
        }),
    }
}
