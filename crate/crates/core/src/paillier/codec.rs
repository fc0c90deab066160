use num_bigint::{BigInt, BigUint, Sign};
use rand::RngCore;

use super::{Ciphertext, PaillierError, PublicKey, SecretKey};
use crate::scalar::Scalar;

pub const DEFAULT_FRACTION_BITS: u32 = 32;

/// Maps reals to `Z_n` as `round(v·2^f)`, negatives as `n − |·|`.
///
/// Products double the scale, so the codec also carries the deepest scale
/// the protocols are allowed to reach (`3f` by default). The modulus must
/// leave headroom above that depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPointCodec {
    fraction_bits: u32,
    max_scale: u32,
    n: BigUint,
    half_n: BigUint,
}

impl FixedPointCodec {
    pub fn new(pk: &PublicKey, fraction_bits: u32) -> Result<Self, PaillierError> {
        Self::with_max_scale(pk, fraction_bits, 3 * fraction_bits)
    }

    pub fn with_max_scale(pk: &PublicKey, fraction_bits: u32, max_scale: u32) -> Result<Self, PaillierError> {
        if max_scale < fraction_bits {
            return Err(PaillierError::InvalidKey("maximum scale below fraction bits".into()));
        }
        if max_scale > u8::MAX as u32 {
            return Err(PaillierError::InvalidKey("scale must fit in one byte".into()));
        }
        // Keep at least one bit of integer range above the deepest scale.
        if pk.bits() < max_scale as u64 + 3 {
            return Err(PaillierError::InvalidKey(format!(
                "{}-bit modulus cannot hold scale {max_scale}",
                pk.bits()
            )));
        }
        Ok(Self {
            fraction_bits,
            max_scale,
            n: pk.n().clone(),
            half_n: pk.half_n().clone(),
        })
    }

    pub fn fraction_bits(&self) -> u32 {
        self.fraction_bits
    }

    pub fn max_scale(&self) -> u32 {
        self.max_scale
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn check_scale(&self, scale: u32) -> Result<(), PaillierError> {
        if scale > self.max_scale {
            return Err(PaillierError::ScaleOverflow {
                scale,
                max: self.max_scale,
            });
        }
        Ok(())
    }

    /// Integer in the centred range `[-n/2, n/2]` to its ring representative.
    pub fn encode_integer(&self, k: &BigInt) -> Result<BigUint, PaillierError> {
        if k.magnitude() > &self.half_n {
            return Err(PaillierError::EncodingOverflow(k.to_string()));
        }
        Ok(if k.sign() == Sign::Minus {
            &self.n - k.magnitude()
        } else {
            k.magnitude().clone()
        })
    }

    pub fn encode<T: Scalar>(&self, v: &T) -> Result<BigUint, PaillierError> {
        self.encode_at(v, self.fraction_bits)
    }

    pub fn encode_at<T: Scalar>(&self, v: &T, scale: u32) -> Result<BigUint, PaillierError> {
        self.check_scale(scale)?;
        let k = v
            .to_fixed(scale)
            .ok_or_else(|| PaillierError::EncodingOverflow(format!("{v:?}")))?;
        self.encode_integer(&k)
    }

    pub fn signed(&self, m: &BigUint) -> BigInt {
        if m > &self.half_n {
            BigInt::from_biguint(Sign::Minus, &self.n - m)
        } else {
            BigInt::from_biguint(Sign::Plus, m.clone())
        }
    }

    pub fn decode<T: Scalar>(&self, m: &BigUint, scale: u32) -> T {
        T::from_fixed(&self.signed(m), scale)
    }

    pub fn encrypt<T: Scalar, R: RngCore + ?Sized>(
        &self,
        pk: &PublicKey,
        v: &T,
        rng: &mut R,
    ) -> Result<Ciphertext, PaillierError> {
        self.encrypt_at(pk, v, self.fraction_bits, rng)
    }

    pub fn encrypt_at<T: Scalar, R: RngCore + ?Sized>(
        &self,
        pk: &PublicKey,
        v: &T,
        scale: u32,
        rng: &mut R,
    ) -> Result<Ciphertext, PaillierError> {
        pk.encrypt_scaled(&self.encode_at(v, scale)?, scale, rng)
    }

    pub fn encrypt_vector<T: Scalar, R: RngCore + ?Sized>(
        &self,
        pk: &PublicKey,
        values: &[T],
        rng: &mut R,
    ) -> Result<Vec<Ciphertext>, PaillierError> {
        values.iter().map(|v| self.encrypt(pk, v, rng)).collect()
    }

    pub fn decrypt<T: Scalar>(&self, sk: &SecretKey, c: &Ciphertext) -> Result<T, PaillierError> {
        Ok(self.decode(&sk.decrypt(c)?, c.scale()))
    }

    pub fn decrypt_vector<T: Scalar>(&self, sk: &SecretKey, cs: &[Ciphertext]) -> Result<Vec<T>, PaillierError> {
        cs.iter().map(|c| self.decrypt(sk, c)).collect()
    }
}
