//! Rademacher observations.
//!
//! A rado `π_σ = ½ Σ_i (σ_i + y_i) x_i` sums the examples whose label agrees
//! with the signature `σ`. Rados are built locally, lifted into a shared
//! feature space and stacked into matrices for the solvers.

mod encrypted;
mod io;

pub use encrypted::{encrypt_examples, encrypt_signature, encrypted_rado, EncryptedExamples, PlainSigmaRados};
pub use io::{read_rados_csv, write_rados_csv};

use rand::Rng;
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::paillier::PaillierError;
use crate::scalar::Scalar;
use crate::secmath::SecError;

#[derive(Debug, Error)]
pub enum RadoError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("signature length {0} is outside 1..=16 for full enumeration")]
    TooManyExamples(usize),
    #[error("signature entries must be ±1, got {0}")]
    InvalidSignature(i64),
    #[error("label must be ±1, got {0}")]
    InvalidLabel(String),
    #[error("non-finite coordinate at example {example}, feature {feature}")]
    NonFinite { example: usize, feature: usize },
    #[error("invalid lift map: {0}")]
    InvalidMap(String),
    #[error("at least one signature must be requested")]
    NoSignatures,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error(transparent)]
    Secure(#[from] SecError),
    #[error("{0}")]
    Io(String),
}

fn check_len(expected: usize, got: usize) -> Result<(), RadoError> {
    if expected != got {
        return Err(RadoError::LengthMismatch { expected, got });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// `+1` for non-negative scores.
    pub fn from_score(s: f64) -> Self {
        if s >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn from_i64(v: i64) -> Result<Self, RadoError> {
        match v {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(RadoError::InvalidLabel(other.to_string())),
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn value<T: Scalar>(self) -> T {
        match self {
            Label::Positive => T::one(),
            Label::Negative => -T::one(),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:+}", self.as_i8())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub x: Vec<T>,
    pub y: Label,
}

impl<T: Scalar> Example<T> {
    pub fn new(x: Vec<T>, y: Label) -> Self {
        Self { x, y }
    }
}

/// A non-empty list of examples of uniform dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    examples: Vec<Example<T>>,
    d: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(examples: Vec<Example<T>>) -> Result<Self, RadoError> {
        let d = examples.first().ok_or(RadoError::Empty)?.x.len();
        for (i, e) in examples.iter().enumerate() {
            check_len(d, e.x.len())?;
            if let Some(j) = e.x.iter().position(|v| !v.is_finite_value()) {
                return Err(RadoError::NonFinite { example: i, feature: j });
            }
        }
        Ok(Self { examples, d })
    }

    pub fn from_rows(rows: Vec<Vec<T>>, labels: Vec<Label>) -> Result<Self, RadoError> {
        check_len(rows.len(), labels.len())?;
        Self::new(rows.into_iter().zip(labels).map(|(x, y)| Example { x, y }).collect())
    }

    pub fn m(&self) -> usize {
        self.examples.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn examples(&self) -> &[Example<T>] {
        &self.examples
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.y).collect()
    }

    pub fn x_matrix(&self) -> Matrix<T> {
        Matrix::from_fn(self.m(), self.d, |i, j| self.examples[i].x[j].clone())
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self, RadoError> {
        Self::new(indices.iter().map(|&i| self.examples[i].clone()).collect())
    }

    /// Appends a constant `1` feature.
    pub fn with_intercept(&self) -> Self {
        let examples = self
            .examples
            .iter()
            .map(|e| {
                let mut x = e.x.clone();
                x.push(T::one());
                Example { x, y: e.y }
            })
            .collect();
        Self {
            examples,
            d: self.d + 1,
        }
    }

    /// `true` for every feature that is non-zero in at least one example.
    pub fn feature_presence(&self) -> Vec<bool> {
        (0..self.d)
            .map(|j| self.examples.iter().any(|e| !e.x[j].is_zero()))
            .collect()
    }

    pub fn scale_features(&self, c: &T) -> Self {
        Self {
            examples: self
                .examples
                .iter()
                .map(|e| Example {
                    x: e.x.iter().map(|v| v.clone() * c.clone()).collect(),
                    y: e.y,
                })
                .collect(),
            d: self.d,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            examples: self
                .examples
                .iter()
                .map(|e| Example {
                    x: e.x.iter().map(|v| U::from_f64_lossy(v.approx_f64())).collect(),
                    y: e.y,
                })
                .collect(),
            d: self.d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature(Vec<i8>);

impl Signature {
    pub fn new(sigma: Vec<i8>) -> Result<Self, RadoError> {
        if let Some(&bad) = sigma.iter().find(|&&s| s != 1 && s != -1) {
            return Err(RadoError::InvalidSignature(bad as i64));
        }
        Ok(Self(sigma))
    }

    /// `σ_i = y_i` for every example.
    pub fn agreeing(labels: &[Label]) -> Self {
        Self(labels.iter().map(|l| l.as_i8()).collect())
    }

    /// `σ_i = −y_i` for every example.
    pub fn opposing(labels: &[Label]) -> Self {
        Self(labels.iter().map(|l| -l.as_i8()).collect())
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Where a rado came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RadoOrigin {
    pub peer: Option<usize>,
    pub signature: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rado<T> {
    pub pi: Vec<T>,
    pub origin: RadoOrigin,
}

impl<T: Scalar> Rado<T> {
    pub fn new(pi: Vec<T>) -> Self {
        Self {
            pi,
            origin: RadoOrigin::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.pi.len()
    }

    pub fn with_origin(mut self, peer: Option<usize>, signature: Option<usize>) -> Self {
        self.origin = RadoOrigin { peer, signature };
        self
    }
}

/// Injection of a local coordinate space into a larger global one.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LiftMap {
    global_dim: usize,
    positions: Vec<usize>,
}

impl LiftMap {
    pub fn new(positions: Vec<usize>, global_dim: usize) -> Result<Self, RadoError> {
        let mut seen = vec![false; global_dim];
        for &p in &positions {
            if p >= global_dim {
                return Err(RadoError::InvalidMap(format!("position {p} ≥ {global_dim}")));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(RadoError::InvalidMap(format!("position {p} repeated")));
            }
        }
        Ok(Self { global_dim, positions })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            global_dim: d,
            positions: (0..d).collect(),
        }
    }

    /// Map onto the coordinates flagged `true`, in increasing order.
    pub fn from_presence(presence: &[bool]) -> Self {
        Self {
            global_dim: presence.len(),
            positions: presence
                .iter()
                .enumerate()
                .filter_map(|(i, &p)| p.then_some(i))
                .collect(),
        }
    }

    pub fn local_dim(&self) -> usize {
        self.positions.len()
    }

    pub fn global_dim(&self) -> usize {
        self.global_dim
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn lift<T: Scalar>(&self, z: &[T]) -> Result<Vec<T>, RadoError> {
        check_len(self.local_dim(), z.len())?;
        let mut out = vec![T::zero(); self.global_dim];
        for (v, &p) in z.iter().zip(&self.positions) {
            out[p] = v.clone();
        }
        Ok(out)
    }

    pub fn restrict<T: Clone>(&self, z: &[T]) -> Result<Vec<T>, RadoError> {
        check_len(self.global_dim, z.len())?;
        Ok(self.positions.iter().map(|&p| z[p].clone()).collect())
    }
}

pub fn lift<T: Scalar>(z: &[T], map: &LiftMap) -> Result<Vec<T>, RadoError> {
    map.lift(z)
}

/// `π_σ = ½ Σ_i (σ_i + y_i) x_i`.
pub fn make_rado<T: Scalar>(ds: &Dataset<T>, sigma: &Signature) -> Result<Rado<T>, RadoError> {
    check_len(ds.m(), sigma.len())?;
    let mut pi = vec![T::zero(); ds.d()];
    for (e, &s) in ds.examples().iter().zip(sigma.as_slice()) {
        let coefficient = (s + e.y.as_i8()) / 2;
        debug_assert!((-1..=1).contains(&coefficient));
        match coefficient {
            0 => {}
            1 => pi.iter_mut().zip(&e.x).for_each(|(p, x)| *p = p.clone() + x.clone()),
            _ => pi.iter_mut().zip(&e.x).for_each(|(p, x)| *p = p.clone() - x.clone()),
        }
    }
    Ok(Rado::new(pi))
}

/// `k` signatures drawn independently and uniformly from `{−1, +1}^m`.
pub fn sample_signatures<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<Vec<Signature>, RadoError> {
    if k == 0 {
        return Err(RadoError::NoSignatures);
    }
    Ok((0..k)
        .map(|_| Signature((0..m).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()))
        .collect())
}

/// All `2^m` signatures in lexicographic order (`−1` before `+1`).
pub fn all_signatures(m: usize) -> Result<Vec<Signature>, RadoError> {
    if m == 0 || m > 16 {
        return Err(RadoError::TooManyExamples(m));
    }
    Ok((0..1usize << m)
        .map(|idx| {
            Signature(
                (0..m)
                    .map(|j| if idx >> (m - 1 - j) & 1 == 1 { 1 } else { -1 })
                    .collect(),
            )
        })
        .collect())
}

/// `α·lift(y·s) + Σ_j lift(π^j)`.
pub fn bb_rado<T: Scalar>(
    alpha: &T,
    s: &[T],
    y: Label,
    blocks: &[(Rado<T>, LiftMap)],
    map_s: &LiftMap,
) -> Result<Rado<T>, RadoError> {
    let global = map_s.global_dim();
    let coefficient = alpha.clone() * y.value::<T>();
    let scaled: Vec<T> = s.iter().map(|v| v.clone() * coefficient.clone()).collect();
    let mut out = map_s.lift(&scaled)?;
    for (rado, map) in blocks {
        check_len(global, map.global_dim())?;
        let lifted = map.lift(&rado.pi)?;
        out.iter_mut().zip(lifted).for_each(|(o, v)| *o = o.clone() + v);
    }
    Ok(Rado::new(out))
}

/// Column-stacks rados into a `d × k` matrix.
pub fn rado_matrix<T: Scalar>(rados: &[Rado<T>]) -> Result<Matrix<T>, RadoError> {
    if rados.is_empty() {
        return Err(RadoError::Empty);
    }
    let cols: Vec<Vec<T>> = rados.iter().map(|r| r.pi.clone()).collect();
    Ok(Matrix::from_columns(&cols)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> Dataset<f64> {
        Dataset::from_rows(
            vec![vec![1.0, 0.0], vec![0.0, 2.0]],
            vec![Label::Positive, Label::Positive],
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluated_rado() {
        let sigma = Signature::new(vec![1, -1]).unwrap();
        assert_eq!(make_rado(&toy(), &sigma).unwrap().pi, vec![1.0, 0.0]);
    }

    #[test]
    fn agreeing_and_opposing_signatures() {
        let ds = Dataset::from_rows(
            vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]],
            vec![Label::Positive, Label::Negative, Label::Positive],
        )
        .unwrap();
        let zero = make_rado(&ds, &Signature::opposing(&ds.labels())).unwrap();
        assert_eq!(zero.pi, vec![0.0, 0.0]);
        let all = make_rado(&ds, &Signature::agreeing(&ds.labels())).unwrap();
        assert_eq!(all.pi, vec![1.0 - 3.0 + 0.5, 2.0 + 1.0 + 0.5]);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let sigma = Signature::new(vec![1]).unwrap();
        assert!(matches!(
            make_rado(&toy(), &sigma),
            Err(RadoError::LengthMismatch { .. })
        ));
        assert!(Signature::new(vec![1, 0]).is_err());
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let s = all_signatures(2).unwrap();
        let v: Vec<&[i8]> = s.iter().map(|s| s.as_slice()).collect();
        assert_eq!(v, vec![&[-1, -1][..], &[-1, 1], &[1, -1], &[1, 1]]);
        assert_eq!(all_signatures(3).unwrap().len(), 8);
        assert!(all_signatures(0).is_err());
        assert!(all_signatures(17).is_err());
    }

    #[test]
    fn sampling_rejects_zero_count() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(
            sample_signatures(3, 0, &mut rng),
            Err(RadoError::NoSignatures)
        ));
        for s in sample_signatures(1, 20, &mut rng).unwrap() {
            assert!(s.as_slice() == [1] || s.as_slice() == [-1]);
        }
    }

    #[test]
    fn lift_examples() {
        let map = LiftMap::new(vec![0, 1], 4).unwrap();
        assert_eq!(lift(&[3.0, 4.0], &map).unwrap(), vec![3.0, 4.0, 0.0, 0.0]);
        let id = LiftMap::identity(3);
        assert_eq!(id.lift(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(LiftMap::new(vec![1, 1], 3).is_err());
        assert!(LiftMap::new(vec![3], 3).is_err());
        let presence = LiftMap::from_presence(&[false, true, true, false]);
        assert_eq!(presence.positions(), &[1, 2]);
    }

    #[test]
    fn bb_rado_examples() {
        let empty = bb_rado(&0.0, &[5.0], Label::Positive, &[], &LiftMap::new(vec![0], 2).unwrap()).unwrap();
        assert_eq!(empty.pi, vec![0.0, 0.0]);
        let block = (Rado::new(vec![3.0]), LiftMap::new(vec![1], 2).unwrap());
        let map_s = LiftMap::new(vec![0], 2).unwrap();
        let pos = bb_rado(&1.0, &[1.0], Label::Positive, std::slice::from_ref(&block), &map_s).unwrap();
        assert_eq!(pos.pi, vec![1.0, 3.0]);
        let neg = bb_rado(&1.0, &[1.0], Label::Negative, &[block], &map_s).unwrap();
        assert_eq!(neg.pi, vec![-1.0, 3.0]);
    }

    #[test]
    fn rado_matrix_stacks_columns() {
        let r = vec![Rado::new(vec![1.0, 2.0]), Rado::new(vec![3.0, 4.0])];
        let b = rado_matrix(&r).unwrap();
        assert_eq!(b.shape(), (2, 2));
        assert_eq!(b.column(1), vec![3.0, 4.0]);
        assert_eq!(rado_matrix(&r[..1]).unwrap().shape(), (2, 1));
        assert!(rado_matrix::<f64>(&[]).is_err());
    }

    #[test]
    fn exact_rational_rados() {
        let q = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        let ds = Dataset::from_rows(
            vec![vec![q(1, 3), q(2, 7)], vec![q(-1, 5), q(1, 1)]],
            vec![Label::Positive, Label::Negative],
        )
        .unwrap();
        let r = make_rado(&ds, &Signature::new(vec![1, -1]).unwrap()).unwrap();
        assert_eq!(r.pi, vec![q(1, 3) + q(1, 5), q(2, 7) - q(1, 1)]);
    }
}
