use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_traits::{One, Zero};
use rand::RngCore;

use super::holder::uniform_scale;
use super::{HolderReply, HolderRequest, InverseParams, KeyHolderLink, SecError, SecureContext};
use crate::linalg::Matrix;
use crate::paillier::{Ciphertext, PublicKey};
use crate::scalar::Scalar;

/// The ciphertext-only side of the two-party protocols.
pub struct SecureWorker<'a> {
    ctx: &'a SecureContext,
    link: &'a mut dyn KeyHolderLink,
    rng: &'a mut dyn RngCore,
}

impl<'a> SecureWorker<'a> {
    pub fn new(ctx: &'a SecureContext, link: &'a mut dyn KeyHolderLink, rng: &'a mut dyn RngCore) -> Self {
        Self { ctx, link, rng }
    }

    pub fn context(&self) -> &SecureContext {
        self.ctx
    }

    fn pk(&self) -> &PublicKey {
        self.ctx.pk()
    }

    fn random_mask(&mut self) -> BigUint {
        self.rng.gen_biguint_below(self.ctx.pk().n())
    }

    /// `⟦c + r⟧` for a fresh encryption of `r`.
    fn mask(&mut self, c: &Ciphertext, r: &BigUint) -> Result<Ciphertext, SecError> {
        let pk = self.ctx.pk();
        let er = pk.encrypt_scaled(r, c.scale(), &mut *self.rng)?;
        Ok(pk.hom_add(c, &er)?)
    }

    /// `(−r) ⊗ c`.
    fn times_neg(&self, r: &BigUint, c: &Ciphertext) -> Ciphertext {
        let n = self.pk().n();
        let e = (n - r % n) % n;
        self.pk().hom_scalar_mul_u(&e, c)
    }

    fn product_scale(&self, a: u32, b: u32) -> Result<u32, SecError> {
        let s = a + b;
        self.ctx.check_scale(s)?;
        Ok(s)
    }

    /// `⟦x_i · y_i⟧` for each `i`, at the sum of the input scales.
    pub fn sec_elem_prod(&mut self, x: &[Ciphertext], y: &[Ciphertext]) -> Result<Vec<Ciphertext>, SecError> {
        if x.len() != y.len() {
            return Err(SecError::Dimension(format!("{} vs {}", x.len(), y.len())));
        }
        let n = self.pk().n().clone();
        let mut r1 = Vec::with_capacity(x.len());
        let mut r2 = Vec::with_capacity(x.len());
        let mut left = Vec::with_capacity(x.len());
        let mut right = Vec::with_capacity(x.len());
        for (a, b) in x.iter().zip(y) {
            self.product_scale(a.scale(), b.scale())?;
            let (ra, rb) = (self.random_mask(), self.random_mask());
            left.push(self.mask(a, &ra)?);
            right.push(self.mask(b, &rb)?);
            r1.push(ra);
            r2.push(rb);
        }
        let w = self
            .link
            .exchange(HolderRequest::ElemProd {
                left: left.clone(),
                right: right.clone(),
            })?
            .into_ciphertexts(x.len())?;
        let pk = self.pk();
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let s = w[i].scale();
            // x'y' − r2·x' − r1·y' + r1·r2 = xy
            let t1 = self.times_neg(&r2[i], &left[i]).with_scale(s);
            let t2 = self.times_neg(&r1[i], &right[i]).with_scale(s);
            let acc = pk.hom_add(&pk.hom_add(&w[i], &t1)?, &t2)?;
            let r12 = BigInt::from_biguint(Sign::Plus, &r1[i] * &r2[i] % &n);
            out.push(pk.add_plain(&acc, &r12));
        }
        Ok(out)
    }

    /// `⟦Σ x_i y_i⟧` with one round trip.
    pub fn sec_inner_prod(&mut self, x: &[Ciphertext], y: &[Ciphertext]) -> Result<Ciphertext, SecError> {
        if x.len() != y.len() {
            return Err(SecError::Dimension(format!("{} vs {}", x.len(), y.len())));
        }
        let row = Matrix::from_vec(1, x.len(), x.to_vec()).map_err(|e| SecError::Dimension(e.to_string()))?;
        let col = Matrix::from_vec(y.len(), 1, y.to_vec()).map_err(|e| SecError::Dimension(e.to_string()))?;
        Ok(self.sec_mat_prod(&row, &col)?.into_vec().remove(0))
    }

    /// `⟦x yᵀ⟧` as a `d × 1` by `1 × e` product in one round trip. When `x`
    /// and `y` are the same vector only the upper triangle is computed.
    pub fn sec_outer_prod(&mut self, x: &[Ciphertext], y: &[Ciphertext]) -> Result<Matrix<Ciphertext>, SecError> {
        let col = Matrix::from_vec(x.len(), 1, x.to_vec()).map_err(|e| SecError::Dimension(e.to_string()))?;
        let row = Matrix::from_vec(1, y.len(), y.to_vec()).map_err(|e| SecError::Dimension(e.to_string()))?;
        self.mat_prod(&col, &row, x == y)
    }

    /// `⟦XY⟧` in one round trip: both operands are masked once, the key holder
    /// multiplies the masked matrices and the worker removes the cross terms.
    pub fn sec_mat_prod(
        &mut self,
        x: &Matrix<Ciphertext>,
        y: &Matrix<Ciphertext>,
    ) -> Result<Matrix<Ciphertext>, SecError> {
        self.mat_prod(x, y, false)
    }

    /// Like [`sec_mat_prod`](Self::sec_mat_prod) for products known to be
    /// symmetric; only the upper triangle is computed.
    pub fn sec_mat_prod_symmetric(
        &mut self,
        x: &Matrix<Ciphertext>,
        y: &Matrix<Ciphertext>,
    ) -> Result<Matrix<Ciphertext>, SecError> {
        self.mat_prod(x, y, true)
    }

    /// Reference product with one inner-product exchange per entry.
    pub fn sec_mat_prod_entrywise(
        &mut self,
        x: &Matrix<Ciphertext>,
        y: &Matrix<Ciphertext>,
    ) -> Result<Matrix<Ciphertext>, SecError> {
        check_conformable(x, y)?;
        let cols: Vec<Vec<Ciphertext>> = (0..y.cols()).map(|j| y.column(j)).collect();
        let mut out = Vec::with_capacity(x.rows() * y.cols());
        for i in 0..x.rows() {
            for col in &cols {
                out.push(self.sec_inner_prod(x.row(i), col)?);
            }
        }
        Ok(Matrix::from_vec(x.rows(), y.cols(), out).expect("shape by construction"))
    }

    fn mat_prod(
        &mut self,
        x: &Matrix<Ciphertext>,
        y: &Matrix<Ciphertext>,
        upper_only: bool,
    ) -> Result<Matrix<Ciphertext>, SecError> {
        check_conformable(x, y)?;
        let (d, k, e) = (x.rows(), x.cols(), y.cols());
        if upper_only && d != e {
            return Err(SecError::Dimension("symmetric product must be square".into()));
        }
        let scale = self.product_scale(uniform_scale(x.as_slice())?, uniform_scale(y.as_slice())?)?;
        let r1 = Matrix::from_fn(d, k, |_, _| self.random_mask());
        let r2 = Matrix::from_fn(k, e, |_, _| self.random_mask());
        let xm = Matrix::from_vec(
            d,
            k,
            x.iter()
                .zip(r1.iter())
                .map(|(c, r)| self.mask(c, r))
                .collect::<Result<_, _>>()?,
        )
        .expect("shape preserved");
        let ym = Matrix::from_vec(
            k,
            e,
            y.iter()
                .zip(r2.iter())
                .map(|(c, r)| self.mask(c, r))
                .collect::<Result<_, _>>()?,
        )
        .expect("shape preserved");
        let expected = if upper_only { d * (d + 1) / 2 } else { d * e };
        let reply = self.link.exchange(HolderRequest::MatProd {
            left: xm,
            right: ym.clone(),
            upper_only,
        })?;
        let mut w = reply.into_ciphertexts(expected)?.into_iter();
        let pk = self.pk();
        // Every Y' entry is raised to one R1 entry per output row, and every
        // X entry to one R2 entry per output column, so tables are shared.
        let n = pk.n();
        let neg = |r: &BigUint| (n - r % n) % n;
        let (e1, e2) = (r1.map(neg), r2.map(neg));
        let ty = ym.map(|c| pk.pow_table(&c.with_scale(scale)));
        let tx = x.map(|c| pk.pow_table(&c.with_scale(scale)));
        let mut terms = Vec::with_capacity(2 * k);
        let mut slots: Vec<Option<Ciphertext>> = vec![None; d * e];
        for i in 0..d {
            let start = if upper_only { i } else { 0 };
            for j in start..e {
                let mut acc = w.next().expect("count checked");
                if acc.scale() != scale {
                    return Err(SecError::Protocol(format!(
                        "product returned at scale {}, expected {scale}",
                        acc.scale()
                    )));
                }
                // W − R1·Y' − X·R2 = XY
                terms.clear();
                for l in 0..k {
                    terms.push((&ty[(l, j)], &e1[(i, l)]));
                    terms.push((&tx[(i, l)], &e2[(l, j)]));
                }
                acc = pk.hom_add(&acc, &pk.multi_exp(&terms)?)?;
                if upper_only {
                    slots[j * e + i] = Some(acc.clone());
                }
                slots[i * e + j] = Some(acc);
            }
        }
        Ok(Matrix::from_vec(d, e, slots.into_iter().map(|s| s.expect("filled")).collect()).expect("shape"))
    }

    /// Lowers every entry to `to_scale`, rounding stochastically.
    ///
    /// The worker shifts each value by `n/4` and masks with `r` uniform in
    /// `[0, n/2)`, so the masked value never wraps for `|x| < n/4`. The key
    /// holder returns `⟦(x + n/4 + r) >> k⟧`; subtracting `(n/4 + r) >> k`
    /// leaves `⌊x/2^k⌋` or `⌊x/2^k⌋ + 1`.
    pub fn rescale(&mut self, values: &[Ciphertext], to_scale: u32) -> Result<Vec<Ciphertext>, SecError> {
        if values.is_empty() {
            return Ok(Vec::new());
        }
        for c in values {
            if c.scale() <= to_scale {
                return Err(SecError::BadRescale {
                    from: c.scale(),
                    to: to_scale,
                });
            }
        }
        let n = self.pk().n().clone();
        let quarter = &n >> 2u32;
        let window = &n >> 1u32;
        let mut offsets = Vec::with_capacity(values.len());
        let mut masked = Vec::with_capacity(values.len());
        for c in values {
            let r = &quarter + self.rng.gen_biguint_below(&window);
            masked.push(self.mask(c, &r)?);
            offsets.push(r);
        }
        let reply = self.link.exchange(HolderRequest::Rescale {
            to_scale,
            values: masked,
        })?;
        let shifted = reply.into_ciphertexts(values.len())?;
        let pk = self.pk();
        Ok(shifted
            .iter()
            .zip(values.iter().zip(&offsets))
            .map(|(z, (c, r))| {
                let k = c.scale() - to_scale;
                let back = BigInt::from_biguint(Sign::Minus, r >> k);
                pk.add_plain(z, &back)
            })
            .collect())
    }

    pub fn rescale_matrix(&mut self, m: &Matrix<Ciphertext>, to_scale: u32) -> Result<Matrix<Ciphertext>, SecError> {
        let out = self.rescale(m.as_slice(), to_scale)?;
        Ok(Matrix::from_vec(m.rows(), m.cols(), out).expect("shape preserved"))
    }

    /// Moves every entry to `scale`, exactly when raising and through
    /// [`rescale`](Self::rescale) when lowering.
    pub fn set_scale(&mut self, values: &[Ciphertext], scale: u32) -> Result<Vec<Ciphertext>, SecError> {
        let from = uniform_scale(values)?;
        if from > scale {
            self.rescale(values, scale)
        } else {
            self.ctx.check_scale(scale)?;
            Ok(values.iter().map(|c| self.pk().upscale(c, scale - from)).collect())
        }
    }

    pub fn set_scale_matrix(&mut self, m: &Matrix<Ciphertext>, scale: u32) -> Result<Matrix<Ciphertext>, SecError> {
        let out = self.set_scale(m.as_slice(), scale)?;
        Ok(Matrix::from_vec(m.rows(), m.cols(), out).expect("shape preserved"))
    }

    /// `3I − M` for `M` at scale `s`.
    fn three_minus(&self, m: &Matrix<Ciphertext>) -> Matrix<Ciphertext> {
        let pk = self.pk();
        let s = m.as_slice().first().map_or(0, Ciphertext::scale);
        let three = BigInt::from(3u32) << s;
        Matrix::from_fn(m.rows(), m.cols(), |i, j| {
            let neg = pk.hom_neg(&m[(i, j)]);
            if i == j {
                pk.add_plain(&neg, &three)
            } else {
                neg
            }
        })
    }

    /// Encrypted approximate inverse of a square matrix by the third-order
    /// Newton–Schulz iteration `V ← V(3I − AV(3I − AV))`.
    ///
    /// The start `V₀ = Aᵀ / 2^k` with `2^k ≥ ‖A‖_F²` needs one plaintext
    /// exponent from the key holder. The result is at
    /// [`InverseParams::inverse_scale`].
    pub fn sec_inv(&mut self, a: &Matrix<Ciphertext>, params: &InverseParams) -> Result<Matrix<Ciphertext>, SecError> {
        if !a.is_square() || a.rows() == 0 {
            return Err(SecError::Dimension(format!("cannot invert {:?}", a.shape())));
        }
        let f = self.ctx.fraction_bits();
        let fv = params.inverse_scale(f);
        self.ctx.check_scale(f + fv)?;
        let a = self.set_scale_matrix(a, f)?;

        let norm = self.sec_inner_prod(a.as_slice(), a.as_slice())?;
        let k = match self.link.exchange(HolderRequest::NormExponent { value: norm })? {
            HolderReply::Exponent(k) => k,
            HolderReply::Refused(msg) => return Err(SecError::Protocol(msg)),
            other => return Err(SecError::Protocol(format!("unexpected reply {other:?}"))),
        };
        let v0_scale = f as i64 + k as i64;
        if v0_scale < 0 || v0_scale > self.ctx.codec().max_scale() as i64 {
            return Err(SecError::Protocol(format!("norm exponent {k} out of range")));
        }
        let v0 = a.transpose().map(|c| c.with_scale(v0_scale as u32));
        let mut v = self.set_scale_matrix(&v0, fv)?;

        for _ in 0..params.iterations {
            let m = self.product(&a, &v, params.symmetric)?;
            let m = self.rescale_matrix(&m, f)?;
            let t = self.three_minus(&m);
            let s = self.product(&m, &t, params.symmetric)?;
            let s = self.rescale_matrix(&s, f)?;
            let u = self.three_minus(&s);
            let vu = self.product(&v, &u, params.symmetric)?;
            v = self.rescale_matrix(&vu, fv)?;
        }
        Ok(v)
    }

    fn product(
        &mut self,
        x: &Matrix<Ciphertext>,
        y: &Matrix<Ciphertext>,
        symmetric: bool,
    ) -> Result<Matrix<Ciphertext>, SecError> {
        if symmetric {
            self.sec_mat_prod_symmetric(x, y)
        } else {
            self.sec_mat_prod(x, y)
        }
    }
}

fn check_conformable(x: &Matrix<Ciphertext>, y: &Matrix<Ciphertext>) -> Result<(), SecError> {
    if x.cols() != y.rows() || x.rows() == 0 || y.cols() == 0 {
        return Err(SecError::Dimension(format!("{:?} × {:?}", x.shape(), y.shape())));
    }
    Ok(())
}

/// `⟦Σ x_i y_i⟧` for plaintext `x` (encoded at the fraction bits) and
/// encrypted `y`. Non-interactive.
pub fn local_inner_prod<T: Scalar>(ctx: &SecureContext, x: &[T], y: &[Ciphertext]) -> Result<Ciphertext, SecError> {
    local_inner_prod_at(ctx, x, ctx.fraction_bits(), y)
}

/// As [`local_inner_prod`] with `x` encoded at `x_scale`; the result is at
/// `x_scale` plus the scale of `y`.
pub fn local_inner_prod_at<T: Scalar>(
    ctx: &SecureContext,
    x: &[T],
    x_scale: u32,
    y: &[Ciphertext],
) -> Result<Ciphertext, SecError> {
    if x.len() != y.len() {
        return Err(SecError::Dimension(format!("{} vs {}", x.len(), y.len())));
    }
    let ys = uniform_scale(y)?;
    let scale = x_scale + ys;
    ctx.check_scale(scale)?;
    let pk = ctx.pk();
    let mut acc = pk.zero(scale);
    for (xi, c) in x.iter().zip(y) {
        let k = xi
            .to_fixed(x_scale)
            .ok_or_else(|| SecError::Protocol(format!("cannot encode {xi:?}")))?;
        if k.is_zero() {
            continue;
        }
        let term = if k.is_one() {
            c.clone()
        } else {
            pk.hom_scalar_mul(&k, c)
        };
        acc = pk.hom_add(&acc, &term.with_scale(scale))?;
    }
    Ok(acc)
}
