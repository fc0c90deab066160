use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::HarnessError;
use crate::rado::{Dataset, Label};

pub const IONOSPHERE_FEATURES: usize = 34;

/// Parses the UCI Ionosphere CSV: 34 numbers then `g` (+1) or `b` (−1).
pub fn parse_ionosphere(text: &str) -> Result<Dataset<f64>, HarnessError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| HarnessError::Data { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != IONOSPHERE_FEATURES + 1 {
            return Err(bad(format!(
                "expected {} fields, found {}",
                IONOSPHERE_FEATURES + 1,
                fields.len()
            )));
        }
        let x = fields[..IONOSPHERE_FEATURES]
            .iter()
            .enumerate()
            .map(|(j, f)| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(format!("field {}: not a number: {f:?}", j + 1))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let y = match fields[IONOSPHERE_FEATURES] {
            "g" => Label::Positive,
            "b" => Label::Negative,
            other => return Err(bad(format!("class must be g or b, got {other:?}"))),
        };
        rows.push(x);
        labels.push(y);
    }
    if rows.is_empty() {
        return Err(HarnessError::Data {
            line: 0,
            msg: "no examples".into(),
        });
    }
    Ok(Dataset::from_rows(rows, labels)?)
}

pub fn load_ionosphere(path: &Path) -> Result<Dataset<f64>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
    parse_ionosphere(&text)
}

/// Per-feature `(min, max)` over a dataset.
pub fn feature_ranges(ds: &Dataset<f64>) -> Vec<(f64, f64)> {
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); ds.d()];
    for e in ds.examples() {
        for (r, &v) in ranges.iter_mut().zip(&e.x) {
            *r = (r.0.min(v), r.1.max(v));
        }
    }
    ranges
}

/// Maps each feature to `[0, 1]` using `ranges`; constant features become 0.
/// Values outside the range (test data) are not clipped.
pub fn min_max_scale(ds: &Dataset<f64>, ranges: &[(f64, f64)]) -> Result<Dataset<f64>, HarnessError> {
    if ranges.len() != ds.d() {
        return Err(HarnessError::Invalid(format!(
            "{} ranges for {} features",
            ranges.len(),
            ds.d()
        )));
    }
    let rows = ds
        .examples()
        .iter()
        .map(|e| {
            e.x.iter()
                .zip(ranges)
                .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(Dataset::from_rows(rows, ds.labels())?)
}

/// Stratified, seeded split. Each class contributes `round(ratio · count)`
/// examples to training; both sides are shuffled.
pub fn split(ds: &Dataset<f64>, ratio: f64, seed: u64) -> Result<(Dataset<f64>, Dataset<f64>), HarnessError> {
    let (train, test) = split_indices(&ds.labels(), ratio, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

pub fn split_indices(labels: &[Label], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), HarnessError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(HarnessError::Split(format!("ratio {ratio} is outside (0, 1)")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Label::Positive, Label::Negative] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let take = (ratio * idx.len() as f64).round() as usize;
        if take == 0 || take == idx.len() {
            return Err(HarnessError::Split(format!(
                "class {class} has {} examples; cannot place any on both sides",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[take..]);
        idx.truncate(take);
        train.extend(idx);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((train, test))
}

/// Deals examples to peers round-robin.
pub fn partition(ds: &Dataset<f64>, peers: usize) -> Result<Vec<Dataset<f64>>, HarnessError> {
    if peers == 0 || peers > ds.m() {
        return Err(HarnessError::Invalid(format!(
            "cannot deal {} examples to {peers} peers",
            ds.m()
        )));
    }
    (0..peers)
        .map(|p| {
            let idx: Vec<usize> = (p..ds.m()).step_by(peers).collect();
            Ok(ds.subset(&idx)?)
        })
        .collect()
}
