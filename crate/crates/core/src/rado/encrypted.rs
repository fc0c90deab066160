use num_bigint::BigInt;
use rand::RngCore;

use super::{check_len, Dataset, RadoError, Signature};
use crate::linalg::Matrix;
use crate::paillier::Ciphertext;
use crate::scalar::Scalar;
use crate::secmath::{SecureContext, SecureWorker};

/// A dataset under the key holder's public key: features at the fraction
/// bits, labels as integers at scale 0.
#[derive(Clone, Debug)]
pub struct EncryptedExamples {
    pub x: Matrix<Ciphertext>,
    pub y: Vec<Ciphertext>,
}

impl EncryptedExamples {
    pub fn m(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }
}

pub fn encrypt_examples<T: Scalar, R: RngCore + ?Sized>(
    ctx: &SecureContext,
    ds: &Dataset<T>,
    rng: &mut R,
) -> Result<EncryptedExamples, RadoError> {
    let (pk, codec) = (ctx.pk(), ctx.codec());
    let mut cells = Vec::with_capacity(ds.m() * ds.d());
    let mut y = Vec::with_capacity(ds.m());
    for e in ds.examples() {
        for v in &e.x {
            cells.push(codec.encrypt(pk, v, rng)?);
        }
        let label = codec.encode_integer(&BigInt::from(e.y.as_i8()))?;
        y.push(pk.encrypt(&label, rng)?);
    }
    Ok(EncryptedExamples {
        x: Matrix::from_vec(ds.m(), ds.d(), cells)?,
        y,
    })
}

/// Encrypts a signature as integers at scale 0.
pub fn encrypt_signature<R: RngCore + ?Sized>(
    ctx: &SecureContext,
    sigma: &Signature,
    rng: &mut R,
) -> Result<Vec<Ciphertext>, RadoError> {
    let (pk, codec) = (ctx.pk(), ctx.codec());
    sigma
        .as_slice()
        .iter()
        .map(|&s| Ok(pk.encrypt(&codec.encode_integer(&BigInt::from(s))?, rng)?))
        .collect()
}

/// Rado of encrypted examples under an encrypted signature.
///
/// `φ_i = σ_i + y_i ∈ {−2, 0, 2}` is formed homomorphically and read at
/// scale 1, which applies the ½ exactly. One secure product `φᵀX` then yields
/// every coordinate at the fraction bits plus one.
pub fn encrypted_rado(
    worker: &mut SecureWorker<'_>,
    ex: &EncryptedExamples,
    sigma: &[Ciphertext],
) -> Result<Vec<Ciphertext>, RadoError> {
    check_len(ex.m(), sigma.len())?;
    let pk = worker.context().pk().clone();
    let phi = sigma
        .iter()
        .zip(&ex.y)
        .map(|(s, y)| Ok(pk.hom_add(s, y)?.with_scale(s.scale() + 1)))
        .collect::<Result<Vec<_>, RadoError>>()?;
    let row = Matrix::from_vec(1, phi.len(), phi)?;
    Ok(worker.sec_mat_prod(&row, &ex.x)?.into_vec())
}

/// Rados of one encrypted dataset for plaintext signatures.
///
/// With `σ` public, `2π_j = 2Σ_{σ_i=+1} x_ij − Σ_i x_ij + Σ_i y_i x_ij`. The
/// last two sums do not depend on `σ` and cost one secure product up front;
/// each rado after that is local.
#[derive(Clone, Debug)]
pub struct PlainSigmaRados {
    x: Matrix<Ciphertext>,
    base: Vec<Ciphertext>,
}

impl PlainSigmaRados {
    pub fn new(worker: &mut SecureWorker<'_>, ex: &EncryptedExamples) -> Result<Self, RadoError> {
        let pk = worker.context().pk().clone();
        let row = Matrix::from_vec(1, ex.m(), ex.y.clone())?;
        let yx = worker.sec_mat_prod(&row, &ex.x)?.into_vec();
        let mut base = Vec::with_capacity(ex.d());
        for (j, c) in yx.iter().enumerate() {
            let col_sum = pk.hom_sum(ex.x.column(j).iter())?;
            base.push(pk.hom_sub(c, &col_sum)?);
        }
        Ok(Self { x: ex.x.clone(), base })
    }

    pub fn rado(&self, ctx: &SecureContext, sigma: &Signature) -> Result<Vec<Ciphertext>, RadoError> {
        check_len(self.x.rows(), sigma.len())?;
        let pk = ctx.pk();
        let two = BigInt::from(2);
        let mut out = Vec::with_capacity(self.base.len());
        for (j, base) in self.base.iter().enumerate() {
            let picked: Vec<&Ciphertext> = sigma
                .as_slice()
                .iter()
                .enumerate()
                .filter(|(_, &s)| s == 1)
                .map(|(i, _)| &self.x[(i, j)])
                .collect();
            let acc = if picked.is_empty() {
                base.clone()
            } else {
                let sum = pk.hom_sum(picked)?;
                pk.hom_add(&pk.hom_scalar_mul(&two, &sum), base)?
            };
            out.push(acc.with_scale(base.scale() + 1));
        }
        Ok(out)
    }
}
