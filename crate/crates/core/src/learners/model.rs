use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_dim, LearnError};
use crate::linalg::{dot, Matrix};
use crate::rado::{Label, LiftMap};
use crate::scalar::Scalar;

/// `sign(θᵀx)` with ties going to `+1`.
pub fn predict<T: Scalar>(theta: &[T], x: &[T]) -> Result<Label, LearnError> {
    check_dim(theta.len(), x.len())?;
    Ok(if dot(theta, x) >= T::zero() {
        Label::Positive
    } else {
        Label::Negative
    })
}

/// A linear classifier over the global feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier<T> {
    pub theta: Vec<T>,
}

/// Sidecar written next to a classifier's weight file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMeta {
    pub dim: usize,
    pub feature_map: LiftMap,
    pub config_digest: String,
}

impl<T: Scalar> Classifier<T> {
    pub fn new(theta: Vec<T>) -> Self {
        Self { theta }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn score(&self, x: &[T]) -> Result<T, LearnError> {
        check_dim(self.dim(), x.len())?;
        Ok(dot(&self.theta, x))
    }

    pub fn predict(&self, x: &[T]) -> Result<Label, LearnError> {
        predict(&self.theta, x)
    }

    /// `θ_p`: the coordinates a peer holds.
    pub fn restrict(&self, map: &LiftMap) -> Result<Vec<T>, LearnError> {
        Ok(map.restrict(&self.theta)?)
    }

    /// Fraction of examples whose predicted label differs from the truth.
    pub fn error_rate(&self, xs: &[Vec<T>], ys: &[Label]) -> Result<f64, LearnError> {
        check_dim(xs.len(), ys.len())?;
        if xs.is_empty() {
            return Ok(0.0);
        }
        let mut wrong = 0usize;
        for (x, &y) in xs.iter().zip(ys) {
            if self.predict(x)? != y {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / xs.len() as f64)
    }

    /// Writes `theta.csv` (one weight per line) and `classifier.json`.
    pub fn save(&self, dir: &Path, meta: &ClassifierMeta) -> Result<(), LearnError> {
        check_dim(self.dim(), meta.dim)?;
        let io = |e: std::io::Error| LearnError::Io(e.to_string());
        fs::create_dir_all(dir).map_err(io)?;
        let mut csv = String::new();
        for v in &self.theta {
            csv.push_str(&format!("{:e}\n", v.approx_f64()));
        }
        fs::write(dir.join("theta.csv"), csv).map_err(io)?;
        let json = serde_json::to_string_pretty(meta).map_err(|e| LearnError::Io(e.to_string()))?;
        fs::write(dir.join("classifier.json"), json).map_err(io)
    }

    pub fn load(dir: &Path) -> Result<(Self, ClassifierMeta), LearnError> {
        let io = |e: std::io::Error| LearnError::Io(e.to_string());
        let meta: ClassifierMeta = serde_json::from_str(&fs::read_to_string(dir.join("classifier.json")).map_err(io)?)
            .map_err(|e| LearnError::Io(e.to_string()))?;
        let text = fs::read_to_string(dir.join("theta.csv")).map_err(io)?;
        let theta = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map(T::from_f64_lossy)
                    .map_err(|_| LearnError::Io(format!("theta.csv line {}: bad number", i + 1)))
            })
            .collect::<Result<Vec<T>, _>>()?;
        check_dim(meta.dim, theta.len())?;
        Ok((Self { theta }, meta))
    }
}

/// Diagonal ridge weights: `1` on confident coordinates, `ε` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct Regularizer {
    epsilon: f64,
    confident: Vec<bool>,
}

impl Regularizer {
    pub fn new(epsilon: f64, confident: Vec<bool>) -> Result<Self, LearnError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(LearnError::BadEpsilon(epsilon));
        }
        Ok(Self { epsilon, confident })
    }

    /// `Γ = I`.
    pub fn identity(d: usize) -> Self {
        Self {
            epsilon: 1.0,
            confident: vec![true; d],
        }
    }

    /// Confident where at least half the peers hold the coordinate.
    pub fn from_presence(epsilon: f64, presence: &[Vec<bool>]) -> Result<Self, LearnError> {
        let d = presence.first().map_or(0, Vec::len);
        for p in presence {
            check_dim(d, p.len())?;
        }
        let confident = (0..d)
            .map(|j| 2 * presence.iter().filter(|p| p[j]).count() >= presence.len())
            .collect();
        Self::new(epsilon, confident)
    }

    pub fn dim(&self) -> usize {
        self.confident.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn confident(&self) -> &[bool] {
        &self.confident
    }

    pub fn diagonal<T: Scalar>(&self) -> Vec<T> {
        self.confident
            .iter()
            .map(|&c| if c { T::one() } else { T::from_f64_lossy(self.epsilon) })
            .collect()
    }

    pub fn matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::diag(&self.diagonal())
    }
}
