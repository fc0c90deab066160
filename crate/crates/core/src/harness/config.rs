use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::learners::CenterMode;
use crate::netproto::{TrainConfig, TrainMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Logistic regression on the pooled raw training set.
    BaselineLogistic,
    /// Closed-form rado learner in the clear, same rados as the encrypted runs.
    RadoPlain,
    /// Encrypted rados, plaintext solve of the aggregated system.
    RadoEncRados,
    /// Everything encrypted through to `θ`.
    RadoEncFull,
}

impl ExperimentMode {
    pub const ALL: [ExperimentMode; 4] = [
        ExperimentMode::BaselineLogistic,
        ExperimentMode::RadoPlain,
        ExperimentMode::RadoEncRados,
        ExperimentMode::RadoEncFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentMode::BaselineLogistic => "baseline_logistic",
            ExperimentMode::RadoPlain => "rado_plain",
            ExperimentMode::RadoEncRados => "rado_enc_rados",
            ExperimentMode::RadoEncFull => "rado_enc_full",
        }
    }

    pub fn is_encrypted(self) -> bool {
        matches!(self, ExperimentMode::RadoEncRados | ExperimentMode::RadoEncFull)
    }
}

impl fmt::Display for ExperimentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown mode {s}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub peers: usize,
    pub rados_per_peer: usize,
    pub key_bits: u64,
    pub fraction_bits: u32,
    pub epsilon: f64,
    /// Newton–Schulz iterations.
    pub iterations: usize,
    pub seed: u64,
    /// Share of each class that goes to training.
    pub split_ratio: f64,
    pub center: CenterMode,
    pub intercept: bool,
    /// Rescale every feature to `[0, 1]` using the training set's range.
    pub min_max_scale: bool,
    /// Ridge weight of the logistic baseline.
    pub logistic_l2: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: ExperimentMode::RadoPlain,
            peers: 4,
            rados_per_peer: 25,
            key_bits: 512,
            fraction_bits: 32,
            epsilon: 1e-3,
            iterations: 32,
            seed: 0,
            split_ratio: 0.8,
            center: CenterMode::Mean,
            intercept: true,
            min_max_scale: false,
            logistic_l2: 1e-4,
        }
    }
}

const KEYS: [&str; 13] = [
    "mode",
    "peers",
    "rados_per_peer",
    "key_bits",
    "fraction_bits",
    "epsilon",
    "iterations",
    "seed",
    "split_ratio",
    "center",
    "intercept",
    "min_max_scale",
    "logistic_l2",
];

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| HarnessError::Config {
        line,
        msg: format!("{key}: {e}"),
    })
}

/// Non-comment lines as `(line number, key, value)`.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>, HarnessError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config {
            line: i + 1,
            msg: "expected key = value".into(),
        })?;
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(HarnessError::Config {
                line: i + 1,
                msg: format!("unknown key {key}"),
            });
        }
        if out.iter().any(|(_, seen, _)| *seen == key) {
            return Err(HarnessError::Config {
                line: i + 1,
                msg: format!("duplicate key {key}"),
            });
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Flat `key = value` lines; `#` starts a comment. Missing keys keep
    /// their defaults.
    pub fn from_kv(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (line, key, value) in entries(text)? {
            cfg.set(line, &key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_kv(&std::fs::read_to_string(path).map_err(HarnessError::io(path))?)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), HarnessError> {
        match key {
            "mode" => self.mode = parse(line, key, v)?,
            "peers" => self.peers = parse(line, key, v)?,
            "rados_per_peer" => self.rados_per_peer = parse(line, key, v)?,
            "key_bits" => self.key_bits = parse(line, key, v)?,
            "fraction_bits" => self.fraction_bits = parse(line, key, v)?,
            "epsilon" => self.epsilon = parse(line, key, v)?,
            "iterations" => self.iterations = parse(line, key, v)?,
            "seed" => self.seed = parse(line, key, v)?,
            "split_ratio" => self.split_ratio = parse(line, key, v)?,
            "center" => self.center = parse(line, key, v)?,
            "intercept" => self.intercept = parse(line, key, v)?,
            "min_max_scale" => self.min_max_scale = parse(line, key, v)?,
            "logistic_l2" => self.logistic_l2 = parse(line, key, v)?,
            _ => unreachable!("keys are checked when read"),
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let center = match self.center {
            CenterMode::Sum => "sum",
            CenterMode::Mean => "mean",
        };
        let values: [String; 13] = [
            self.mode.to_string(),
            self.peers.to_string(),
            self.rados_per_peer.to_string(),
            self.key_bits.to_string(),
            self.fraction_bits.to_string(),
            self.epsilon.to_string(),
            self.iterations.to_string(),
            self.seed.to_string(),
            self.split_ratio.to_string(),
            center.to_string(),
            self.intercept.to_string(),
            self.min_max_scale.to_string(),
            self.logistic_l2.to_string(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Invalid(msg.to_string()));
        if self.peers == 0 || self.rados_per_peer == 0 || self.iterations == 0 {
            return bad("peers, rados_per_peer and iterations must be positive");
        }
        if self.key_bits < 128 {
            return bad("key_bits must be at least 128");
        }
        if self.fraction_bits == 0 {
            return bad("fraction_bits must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split_ratio must lie in (0, 1)");
        }
        if !(self.logistic_l2 >= 0.0 && self.logistic_l2.is_finite()) {
            return bad("logistic_l2 must be a non-negative number");
        }
        Ok(())
    }

    /// Protocol settings for the encrypted and plain rado modes.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            mode: match self.mode {
                ExperimentMode::RadoEncRados => TrainMode::EncRados,
                _ => TrainMode::EncFull,
            },
            key_bits: self.key_bits,
            fraction_bits: self.fraction_bits,
            epsilon: self.epsilon,
            iterations: self.iterations,
            rados_per_peer: self.rados_per_peer,
            seed: self.seed,
            center: self.center,
            intercept: self.intercept,
            ..TrainConfig::default()
        }
    }
}

/// Cartesian product of a grid file: the config format, where any value may
/// be a comma-separated list. Combinations vary the last listed key fastest.
pub fn parse_grid(text: &str) -> Result<Vec<ExperimentConfig>, HarnessError> {
    let axes: Vec<(usize, String, Vec<String>)> = entries(text)?
        .into_iter()
        .map(|(line, key, value)| {
            let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
            (line, key, values)
        })
        .collect();
    for (line, key, values) in &axes {
        if values.iter().any(String::is_empty) || values.iter().collect::<BTreeSet<_>>().len() != values.len() {
            return Err(HarnessError::Config {
                line: *line,
                msg: format!("{key}: empty or repeated grid value"),
            });
        }
    }
    let mut grid = vec![ExperimentConfig::default()];
    for (line, key, values) in &axes {
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for base in &grid {
            for v in values {
                let mut cfg = base.clone();
                cfg.set(*line, key, v)?;
                next.push(cfg);
            }
        }
        grid = next;
    }
    for cfg in &grid {
        cfg.validate()?;
    }
    Ok(grid)
}
