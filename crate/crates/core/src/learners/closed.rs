use num_bigint::BigInt;

use super::{check_dim, Classifier, LearnError};
use crate::linalg::{dot, Matrix};
use crate::paillier::Ciphertext;
use crate::rado::Rado;
use crate::scalar::{half, Scalar};
use crate::secmath::{InverseParams, SecError, SecureWorker};

/// `−(E[θᵀπ] − ½ Var[θᵀπ]) + (m/4) θᵀΓθ` with `E`, `Var` uniform over the
/// given rados.
pub fn m_loss<T: Scalar>(theta: &[T], rados: &[Rado<T>], m: usize, gamma: &Matrix<T>) -> Result<T, LearnError> {
    if rados.is_empty() {
        return Err(LearnError::NoRados);
    }
    check_dim(theta.len(), gamma.rows())?;
    let k = T::from_usize(rados.len());
    let mut scores = Vec::with_capacity(rados.len());
    for r in rados {
        check_dim(theta.len(), r.dim())?;
        scores.push(dot(theta, &r.pi));
    }
    let mean = scores.iter().fold(T::zero(), |a, s| a + s.clone()) / k.clone();
    let var = scores
        .iter()
        .map(|s| (s.clone() - mean.clone()) * (s.clone() - mean.clone()))
        .fold(T::zero(), |a, b| a + b)
        / k;
    let two = T::from_usize(2);
    let quad = dot(theta, &gamma.matvec(theta)?);
    Ok(-(mean - var / two) + T::from_usize(m) * quad / T::from_usize(4))
}

/// `θ* = (BBᵀ + k·Γ)⁻¹ B𝟙` for the `d × k` stacked rado matrix `B`.
pub fn closed_form_theta<T: Scalar>(b: &Matrix<T>, gamma: &Matrix<T>) -> Result<Classifier<T>, LearnError> {
    check_dim(b.rows(), gamma.rows())?;
    let k = T::from_usize(b.cols());
    let system = b.matmul(&b.transpose())?.add(&gamma.scale(&k))?;
    let rhs: Vec<T> = (0..b.rows())
        .map(|i| b.row(i).iter().fold(T::zero(), |a, v| a + v.clone()))
        .collect();
    Ok(Classifier::new(system.solve(&rhs)?))
}

/// The objective `closed_form_theta` minimizes:
/// `½ Σ_j (1 − θᵀπ_j)² + (k/2) θᵀΓθ`.
pub fn closed_form_objective<T: Scalar>(theta: &[T], b: &Matrix<T>, gamma: &Matrix<T>) -> Result<T, LearnError> {
    check_dim(theta.len(), b.rows())?;
    let two = T::from_usize(2);
    let mut total = T::zero();
    for j in 0..b.cols() {
        let r = T::one() - dot(theta, &b.column(j));
        total = total + r.clone() * r;
    }
    let quad = dot(theta, &gamma.matvec(theta)?);
    Ok(total / two.clone() + T::from_usize(b.cols()) * quad / two)
}

/// Whether the shared centre `b` is the sum or the mean of all rados.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterMode {
    #[default]
    Sum,
    Mean,
}

impl std::str::FromStr for CenterMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sum" => Ok(CenterMode::Sum),
            "mean" => Ok(CenterMode::Mean),
            _ => Err(format!("unknown centre mode {s}")),
        }
    }
}

/// `b` over the rados of every peer.
pub fn rado_center<T: Scalar>(rados: &[Rado<T>], mode: CenterMode) -> Result<Vec<T>, LearnError> {
    let d = rados.first().ok_or(LearnError::NoRados)?.dim();
    let mut b = vec![T::zero(); d];
    for r in rados {
        check_dim(d, r.dim())?;
        b.iter_mut()
            .zip(&r.pi)
            .for_each(|(acc, v)| *acc = acc.clone() + v.clone());
    }
    if mode == CenterMode::Mean {
        let k = T::from_usize(rados.len());
        b.iter_mut().for_each(|v| *v = v.clone() / k.clone());
    }
    Ok(b)
}

/// What one peer contributes to the shared solve.
#[derive(Clone, Debug, PartialEq)]
pub struct PeerStats<T> {
    /// `Σ π_i`.
    pub e: Vec<T>,
    /// `Σ (π_i − b)(π_i − b)ᵀ`.
    pub v: Matrix<T>,
    pub count: usize,
}

pub fn peer_stats<T: Scalar>(rados: &[Rado<T>], b: &[T]) -> Result<PeerStats<T>, LearnError> {
    let d = b.len();
    let mut e = vec![T::zero(); d];
    let mut v: Matrix<T> = Matrix::zeros(d, d);
    for r in rados {
        check_dim(d, r.dim())?;
        let u: Vec<T> = r.pi.iter().zip(b).map(|(p, c)| p.clone() - c.clone()).collect();
        for i in 0..d {
            e[i] = e[i].clone() + r.pi[i].clone();
            for j in 0..d {
                v[(i, j)] = v[(i, j)].clone() + u[i].clone() * u[j].clone();
            }
        }
    }
    Ok(PeerStats {
        e,
        v,
        count: rados.len(),
    })
}

/// `θ = [Γ + ½ Σ_p v_p]⁻¹ b` with `b` rebuilt from the `e_p`.
pub fn derisked_theta<T: Scalar>(
    stats: &[PeerStats<T>],
    gamma: &Matrix<T>,
    mode: CenterMode,
) -> Result<Classifier<T>, LearnError> {
    let d = gamma.rows();
    let mut b = vec![T::zero(); d];
    let mut s: Matrix<T> = Matrix::zeros(d, d);
    let mut count = 0;
    for p in stats {
        check_dim(d, p.e.len())?;
        check_dim(d, p.v.rows())?;
        b.iter_mut()
            .zip(&p.e)
            .for_each(|(acc, v)| *acc = acc.clone() + v.clone());
        s = s.add(&p.v)?;
        count += p.count;
    }
    if count == 0 {
        return Err(LearnError::NoRados);
    }
    if mode == CenterMode::Mean {
        let k = T::from_usize(count);
        b.iter_mut().for_each(|v| *v = v.clone() / k.clone());
    }
    let system = gamma.add(&s.scale(&half()))?;
    Ok(Classifier::new(system.solve(&b)?))
}

/// Encrypted `θ = (BBᵀ + k·Γ)⁻¹ B𝟙`.
///
/// `B` is the `d × k` stacked rado matrix and `Γ` the `d × d` regularizer,
/// both encrypted at the fraction bits. The result is at the fraction bits.
pub fn secure_rado_solver(
    worker: &mut SecureWorker<'_>,
    enc_b: &Matrix<Ciphertext>,
    enc_gamma: &Matrix<Ciphertext>,
    params: &InverseParams,
) -> Result<Vec<Ciphertext>, LearnError> {
    let d = enc_b.rows();
    check_dim(d, enc_gamma.rows())?;
    check_dim(d, enc_gamma.cols())?;
    let ctx = worker.context().clone();
    let pk = ctx.pk();
    let f = ctx.fraction_bits();
    let bbt = worker.sec_mat_prod_symmetric(enc_b, &enc_b.transpose())?;
    let gamma = worker.set_scale_matrix(enc_gamma, 2 * f)?;
    let k = BigInt::from(enc_b.cols());
    let cells = (0..d * d)
        .map(|idx| {
            let (i, j) = (idx / d, idx % d);
            pk.hom_add(&bbt[(i, j)], &pk.hom_scalar_mul(&k, &gamma[(i, j)]))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(SecError::from)?;
    let system = Matrix::from_vec(d, d, cells)?;
    let v = worker.sec_inv(&system, params)?;
    let row_sums = (0..d)
        .map(|i| pk.hom_sum(enc_b.row(i).iter()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(SecError::from)?;
    let theta = worker.sec_mat_prod(&v, &Matrix::column_vector(row_sums))?;
    Ok(worker.rescale(theta.as_slice(), f)?)
}
