//! Scalar abstraction shared by the plaintext algorithms.
//!
//! Everything numeric outside the ciphertext layer is generic over [`Scalar`],
//! so the same rado, solver and loss code runs on `f32`, `f64` and exact
//! `BigRational`. [`Real`] adds transcendental functions for the losses that
//! need `exp`/`ln`.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, Num, One, Signed, ToPrimitive};

pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    /// Converts a double into this type (exactly, where the type allows it).
    fn from_f64_lossy(v: f64) -> Self;

    /// Nearest double to this value.
    fn approx_f64(&self) -> f64;

    /// `round(self * 2^bits)`, half away from zero.
    fn to_fixed(&self, bits: u32) -> Option<BigInt>;

    /// `v / 2^bits`.
    fn from_fixed(v: &BigInt, bits: u32) -> Self;

    fn from_usize(k: usize) -> Self {
        Self::from_f64_lossy(k as f64)
    }

    fn is_finite_value(&self) -> bool {
        true
    }
}

/// Floating-point scalars.
pub trait Real: Scalar + Float {}

impl Real for f32 {}
impl Real for f64 {}

fn f64_to_fixed(v: f64, bits: u32) -> Option<BigInt> {
    if !v.is_finite() {
        return None;
    }
    let scaled = v * 2f64.powi(bits as i32);
    if !scaled.is_finite() {
        return None;
    }
    num_traits::FromPrimitive::from_f64(scaled.round())
}

fn fixed_to_f64(v: &BigInt, bits: u32) -> f64 {
    // Shift large integers down first so the conversion does not overflow.
    let excess = v.bits().saturating_sub(1000);
    let (mantissa, bits) = if excess > 0 && bits as u64 >= excess {
        (v >> excess, bits - excess as u32)
    } else {
        (v.clone(), bits)
    };
    mantissa.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(bits as i32))
}

impl Scalar for f64 {
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
    fn approx_f64(&self) -> f64 {
        *self
    }
    fn to_fixed(&self, bits: u32) -> Option<BigInt> {
        f64_to_fixed(*self, bits)
    }
    fn from_fixed(v: &BigInt, bits: u32) -> Self {
        fixed_to_f64(v, bits)
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
    fn approx_f64(&self) -> f64 {
        *self as f64
    }
    fn to_fixed(&self, bits: u32) -> Option<BigInt> {
        f64_to_fixed(*self as f64, bits)
    }
    fn from_fixed(v: &BigInt, bits: u32) -> Self {
        fixed_to_f64(v, bits) as f32
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {
    fn from_f64_lossy(v: f64) -> Self {
        BigRational::from_float(v).expect("finite value")
    }
    fn approx_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
    fn to_fixed(&self, bits: u32) -> Option<BigInt> {
        let scaled = self * BigRational::from_integer(BigInt::one() << bits);
        Some(scaled.round().to_integer())
    }
    fn from_fixed(v: &BigInt, bits: u32) -> Self {
        BigRational::new(v.clone(), BigInt::one() << bits)
    }
    fn from_usize(k: usize) -> Self {
        BigRational::from_integer(BigInt::from(k))
    }
}

/// Converts a slice of doubles into any scalar type.
pub fn lift_slice<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::from_f64_lossy(x)).collect()
}

pub(crate) fn half<T: Scalar>() -> T {
    T::one() / (T::one() + T::one())
}

pub(crate) fn sum<T: Scalar>(it: impl IntoIterator<Item = T>) -> T {
    it.into_iter().fold(T::zero(), |acc, x| acc + x)
}

pub(crate) fn max_abs<T: Scalar>(it: impl IntoIterator<Item = T>) -> T {
    it.into_iter().fold(T::zero(), |acc, x| {
        let a = x.abs();
        if a > acc {
            a
        } else {
            acc
        }
    })
}
