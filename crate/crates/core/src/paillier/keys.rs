use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::prime::{is_probable_prime, lcm, random_prime, MILLER_RABIN_ROUNDS};
use super::PaillierError;

/// A Paillier ciphertext together with its public fixed-point scale.
///
/// The plaintext it carries is interpreted as `signed(m) / 2^scale`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    value: BigUint,
    scale: u32,
}

impl Ciphertext {
    pub(crate) fn new(value: BigUint, scale: u32) -> Self {
        Self { value, scale }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// Reads the same plaintext integer at `2^-k` times its current value.
    ///
    /// Exact and free: only the public scale changes.
    pub fn divide_by_pow2(&self, k: u32) -> Self {
        Self {
            value: self.value.clone(),
            scale: self.scale + k,
        }
    }

    /// Reinterprets the plaintext integer at a different scale.
    pub fn with_scale(&self, scale: u32) -> Self {
        Self {
            value: self.value.clone(),
            scale,
        }
    }
}

/// Window width of [`PowTable`].
const POW_WINDOW: u32 = 5;

/// `c^0, c^1, …, c^31` for one ciphertext `c`.
#[derive(Clone, Debug)]
pub struct PowTable {
    powers: Vec<BigUint>,
    scale: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    g: BigUint,
    half_n: BigUint,
}

impl PublicKey {
    pub fn new(n: BigUint) -> Result<Self, PaillierError> {
        if n < BigUint::from(6u32) || n.is_even() {
            return Err(PaillierError::InvalidKey("modulus must be an odd composite".into()));
        }
        let n_squared = &n * &n;
        let g = &n + 1u32;
        let half_n = &n >> 1u32;
        Ok(Self {
            n,
            n_squared,
            g,
            half_n,
        })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// `floor(n / 2)`: plaintexts above this decode as negative.
    pub fn half_n(&self) -> &BigUint {
        &self.half_n
    }

    /// Maps any integer into `[0, n)`.
    pub fn reduce(&self, m: &BigInt) -> BigUint {
        let n = BigInt::from_biguint(Sign::Plus, self.n.clone());
        m.mod_floor(&n).to_biguint().expect("non-negative after mod_floor")
    }

    /// Lifts a plaintext in `[0, n)` to the centred range `(-n/2, n/2]`.
    pub fn signed(&self, m: &BigUint) -> BigInt {
        if m > &self.half_n {
            BigInt::from_biguint(Sign::Plus, m.clone()) - BigInt::from_biguint(Sign::Plus, self.n.clone())
        } else {
            BigInt::from_biguint(Sign::Plus, m.clone())
        }
    }

    /// Uniform element of `Z_n^*`.
    pub fn random_unit<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_below(&self.n);
            if !r.is_zero() && r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    /// Uniform element of `Z_n`.
    pub fn random_plaintext<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_below(&self.n)
    }

    fn check_plaintext(&self, m: &BigUint) -> Result<(), PaillierError> {
        if m >= &self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        Ok(())
    }

    pub(crate) fn check_ciphertext(&self, c: &Ciphertext) -> Result<(), PaillierError> {
        if c.value >= self.n_squared {
            return Err(PaillierError::CiphertextOutOfRange);
        }
        Ok(())
    }

    /// `g^m mod n² = 1 + m·n` for `g = n + 1`.
    fn g_pow(&self, m: &BigUint) -> BigUint {
        (BigUint::one() + m * &self.n) % &self.n_squared
    }

    /// Encrypts with a caller-supplied nonce `r ∈ Z_n^*`.
    pub fn encrypt_with_nonce(&self, m: &BigUint, r: &BigUint, scale: u32) -> Result<Ciphertext, PaillierError> {
        self.check_plaintext(m)?;
        if r.is_zero() || r >= &self.n || !r.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidNonce);
        }
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext::new(self.g_pow(m) * rn % &self.n_squared, scale))
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext, PaillierError> {
        self.encrypt_scaled(m, 0, rng)
    }

    pub fn encrypt_scaled<R: RngCore + ?Sized>(
        &self,
        m: &BigUint,
        scale: u32,
        rng: &mut R,
    ) -> Result<Ciphertext, PaillierError> {
        let r = self.random_unit(rng);
        self.encrypt_with_nonce(m, &r, scale)
    }

    /// Deterministic encryption with nonce 1. Only for public constants that
    /// get folded into an already randomized ciphertext.
    pub fn encrypt_public(&self, m: &BigUint, scale: u32) -> Result<Ciphertext, PaillierError> {
        self.check_plaintext(m)?;
        Ok(Ciphertext::new(self.g_pow(m), scale))
    }

    /// Multiplies in a fresh `r^n`.
    pub fn rerandomize<R: RngCore + ?Sized>(&self, c: &Ciphertext, rng: &mut R) -> Ciphertext {
        let r = self.random_unit(rng);
        let rn = r.modpow(&self.n, &self.n_squared);
        Ciphertext::new(&c.value * rn % &self.n_squared, c.scale)
    }

    /// `⟦a⟧ ⊕ ⟦b⟧ = ⟦a + b⟧`.
    pub fn hom_add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, PaillierError> {
        if a.scale != b.scale {
            return Err(PaillierError::ScaleMismatch {
                left: a.scale,
                right: b.scale,
            });
        }
        Ok(Ciphertext::new(&a.value * &b.value % &self.n_squared, a.scale))
    }

    /// `⟦a⟧ ⊕ (−1)⊗⟦b⟧`.
    pub fn hom_sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, PaillierError> {
        self.hom_add(a, &self.hom_neg(b))
    }

    /// Adds a known plaintext integer without fresh randomness.
    pub fn add_plain(&self, c: &Ciphertext, m: &BigInt) -> Ciphertext {
        let gm = self.g_pow(&self.reduce(m));
        Ciphertext::new(&c.value * gm % &self.n_squared, c.scale)
    }

    /// `α ⊗ ⟦m⟧ = ⟦α·m⟧`; the scale is unchanged.
    ///
    /// Negative `α` uses the modular inverse of the ciphertext when `|α|` is
    /// small and the exponent `α mod n` otherwise.
    pub fn hom_scalar_mul(&self, alpha: &BigInt, c: &Ciphertext) -> Ciphertext {
        let inverse = if alpha.is_negative() && alpha.bits() <= 64 {
            c.value.modinv(&self.n_squared)
        } else {
            None
        };
        let value = match inverse {
            Some(inv) => inv.modpow(alpha.magnitude(), &self.n_squared),
            None => c.value.modpow(&self.reduce(alpha), &self.n_squared),
        };
        Ciphertext::new(value, c.scale)
    }

    pub fn hom_scalar_mul_u(&self, alpha: &BigUint, c: &Ciphertext) -> Ciphertext {
        Ciphertext::new(c.value.modpow(alpha, &self.n_squared), c.scale)
    }

    /// Precomputed small powers of `c` for [`PublicKey::multi_exp`].
    pub fn pow_table(&self, c: &Ciphertext) -> PowTable {
        let mut powers = Vec::with_capacity(1 << POW_WINDOW);
        powers.push(BigUint::one());
        for i in 1..1usize << POW_WINDOW {
            let next = &powers[i - 1] * &c.value % &self.n_squared;
            powers.push(next);
        }
        PowTable { powers, scale: c.scale }
    }

    /// `⊕ᵢ αᵢ ⊗ cᵢ` with one shared chain of squarings (Straus).
    ///
    /// Costs about `max_bits` squarings plus `max_bits / w` multiplications
    /// per term, against a full exponentiation per term done separately.
    pub fn multi_exp(&self, terms: &[(&PowTable, &BigUint)]) -> Result<Ciphertext, PaillierError> {
        let scale = match terms.first() {
            Some((t, _)) => t.scale,
            None => return Err(PaillierError::Empty),
        };
        if let Some((t, _)) = terms.iter().find(|(t, _)| t.scale != scale) {
            return Err(PaillierError::ScaleMismatch {
                left: scale,
                right: t.scale,
            });
        }
        let digits: Vec<Vec<u64>> = terms.iter().map(|(_, e)| e.to_u64_digits()).collect();
        let bits = terms.iter().map(|(_, e)| e.bits()).max().unwrap_or(0);
        let windows = bits.div_ceil(POW_WINDOW as u64);
        let mut acc = BigUint::one();
        for w in (0..windows).rev() {
            if w + 1 < windows {
                for _ in 0..POW_WINDOW {
                    acc = &acc * &acc % &self.n_squared;
                }
            }
            let shift = w * POW_WINDOW as u64;
            let (limb, offset) = ((shift / 64) as usize, shift % 64);
            for ((table, _), ds) in terms.iter().zip(&digits) {
                let lo = ds.get(limb).copied().unwrap_or(0) >> offset;
                let hi = match (offset + POW_WINDOW as u64 > 64, ds.get(limb + 1)) {
                    (true, Some(&h)) => h << (64 - offset),
                    _ => 0,
                };
                let digit = ((lo | hi) & ((1 << POW_WINDOW) - 1)) as usize;
                if digit != 0 {
                    acc = &acc * &table.powers[digit] % &self.n_squared;
                }
            }
        }
        Ok(Ciphertext::new(acc, scale))
    }

    pub fn hom_neg(&self, c: &Ciphertext) -> Ciphertext {
        self.hom_scalar_mul(&BigInt::from(-1), c)
    }

    /// Multiplies the plaintext by `2^k` and raises the scale by `k`, so the
    /// decoded value is unchanged.
    pub fn upscale(&self, c: &Ciphertext, k: u32) -> Ciphertext {
        if k == 0 {
            return c.clone();
        }
        let factor = BigUint::one() << k;
        Ciphertext::new(c.value.modpow(&factor, &self.n_squared), c.scale + k)
    }

    /// Homomorphic sum of a non-empty list of equally scaled ciphertexts.
    pub fn hom_sum<'a>(&self, items: impl IntoIterator<Item = &'a Ciphertext>) -> Result<Ciphertext, PaillierError> {
        let mut it = items.into_iter();
        let first = it.next().ok_or(PaillierError::Empty)?;
        let mut acc = first.value.clone();
        for c in it {
            if c.scale != first.scale {
                return Err(PaillierError::ScaleMismatch {
                    left: first.scale,
                    right: c.scale,
                });
            }
            acc = acc * &c.value % &self.n_squared;
        }
        Ok(Ciphertext::new(acc, first.scale))
    }

    /// An encryption of zero with nonce 1.
    pub fn zero(&self, scale: u32) -> Ciphertext {
        Ciphertext::new(BigUint::one(), scale)
    }
}

#[derive(Clone, Debug)]
struct CrtHalf {
    p: BigUint,
    p_squared: BigUint,
    p_minus_1: BigUint,
    /// `L_p(g^(p−1) mod p²)^(-1) mod p`.
    h: BigUint,
    /// `n mod p(p − 1)`, the reduced exponent for `r^n mod p²`.
    n_mod_order: BigUint,
}

impl CrtHalf {
    fn new(p: &BigUint, n: &BigUint) -> Result<Self, PaillierError> {
        let p_squared = p * p;
        let p_minus_1 = p - 1u32;
        let g = n + 1u32;
        let u = g.modpow(&p_minus_1, &p_squared);
        let l = (u - 1u32) / p;
        let h = l
            .modinv(p)
            .ok_or_else(|| PaillierError::InvalidKey("degenerate prime factor".into()))?;
        let n_mod_order = n % (p * &p_minus_1);
        Ok(Self {
            p: p.clone(),
            p_squared,
            p_minus_1,
            h,
            n_mod_order,
        })
    }

    fn decrypt(&self, c: &BigUint) -> BigUint {
        let u = (c % &self.p_squared).modpow(&self.p_minus_1, &self.p_squared);
        let l = (u - 1u32) / &self.p;
        l * &self.h % &self.p
    }
}

/// Decryption key. Keeps the factorization for CRT-accelerated operations.
#[derive(Clone, Debug)]
pub struct SecretKey {
    public: PublicKey,
    lambda: BigUint,
    mu: BigUint,
    hp: CrtHalf,
    hq: CrtHalf,
    /// `q^(-1) mod p` and `(q²)^(-1) mod p²` for recombination.
    q_inv_p: BigUint,
    qq_inv_pp: BigUint,
}

impl SecretKey {
    /// Builds a key pair from two explicit distinct primes.
    ///
    /// This is also the entry point for toy keys such as `p = 3, q = 5`.
    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<(PublicKey, SecretKey), PaillierError> {
        if p == q {
            return Err(PaillierError::InvalidKey("p and q must differ".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for f in [p, q] {
            if !is_probable_prime(f, MILLER_RABIN_ROUNDS, &mut rng) || f == &BigUint::from(2u32) {
                return Err(PaillierError::InvalidKey(format!("{f} is not an odd prime")));
            }
        }
        let n = p * q;
        let phi = (p - 1u32) * (q - 1u32);
        if !n.gcd(&phi).is_one() {
            return Err(PaillierError::InvalidKey("gcd(n, φ(n)) ≠ 1".into()));
        }
        let public = PublicKey::new(n)?;
        let lambda = lcm(&(p - 1u32), &(q - 1u32));
        let u = public.g.modpow(&lambda, &public.n_squared);
        let l = (u - 1u32) / &public.n;
        let mu = l
            .modinv(&public.n)
            .ok_or_else(|| PaillierError::InvalidKey("L(g^λ) not invertible".into()))?;
        let sk = Self::assemble(public.clone(), lambda, mu, p, q)?;
        Ok((public, sk))
    }

    fn assemble(
        public: PublicKey,
        lambda: BigUint,
        mu: BigUint,
        p: &BigUint,
        q: &BigUint,
    ) -> Result<Self, PaillierError> {
        let hp = CrtHalf::new(p, &public.n)?;
        let hq = CrtHalf::new(q, &public.n)?;
        let q_inv_p = (q % p)
            .modinv(p)
            .ok_or_else(|| PaillierError::InvalidKey("q not invertible mod p".into()))?;
        let qq_inv_pp = (&hq.p_squared % &hp.p_squared)
            .modinv(&hp.p_squared)
            .ok_or_else(|| PaillierError::InvalidKey("q² not invertible mod p²".into()))?;
        Ok(Self {
            public,
            lambda,
            mu,
            hp,
            hq,
            q_inv_p,
            qq_inv_pp,
        })
    }

    /// Rebuilds a key from its serialized fields `(n, λ, μ)`.
    ///
    /// The factorization is recovered from `λ`, which is a multiple of the
    /// Carmichael function of `n`.
    pub fn from_parts(n: BigUint, lambda: BigUint, mu: BigUint) -> Result<Self, PaillierError> {
        let public = PublicKey::new(n)?;
        let (p, q) = factor_with_exponent(&public.n, &lambda)
            .ok_or_else(|| PaillierError::InvalidKey("λ does not factor n".into()))?;
        let sk = Self::assemble(public, lambda, mu, &p, &q)?;
        let u = sk.public.g.modpow(&sk.lambda, &sk.public.n_squared);
        let l = (u - 1u32) / &sk.public.n;
        if !(l * &sk.mu % &sk.public.n).is_one() {
            return Err(PaillierError::InvalidKey("μ·L(g^λ) ≢ 1 (mod n)".into()));
        }
        Ok(sk)
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    /// `L(c^λ mod n²)·μ mod n`, evaluated literally.
    pub fn decrypt_textbook(&self, c: &Ciphertext) -> Result<BigUint, PaillierError> {
        self.public.check_ciphertext(c)?;
        let pk = &self.public;
        let u = c.value.modpow(&self.lambda, &pk.n_squared);
        let l = (u - 1u32) / &pk.n;
        Ok(l * &self.mu % &pk.n)
    }

    /// Same result as [`decrypt_textbook`](Self::decrypt_textbook), computed
    /// modulo `p²` and `q²` separately.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint, PaillierError> {
        self.public.check_ciphertext(c)?;
        let mp = self.hp.decrypt(&c.value);
        let mq = self.hq.decrypt(&c.value);
        // m = mq + q·((mp − mq)·q⁻¹ mod p)
        let p = &self.hp.p;
        let diff = (mp + p - (&mq % p)) % p;
        let t = diff * &self.q_inv_p % p;
        Ok(mq + &self.hq.p * t)
    }

    /// `r^n mod n²` through the factorization.
    fn nonce_power(&self, r: &BigUint) -> BigUint {
        let xp = (r % &self.hp.p_squared).modpow(&self.hp.n_mod_order, &self.hp.p_squared);
        let xq = (r % &self.hq.p_squared).modpow(&self.hq.n_mod_order, &self.hq.p_squared);
        let pp = &self.hp.p_squared;
        let diff = (xp + pp - (&xq % pp)) % pp;
        let t = diff * &self.qq_inv_pp % pp;
        xq + &self.hq.p_squared * t
    }

    /// Encryption for the key holder, identical in distribution to
    /// [`PublicKey::encrypt_scaled`] but faster.
    pub fn encrypt_scaled<R: RngCore + ?Sized>(
        &self,
        m: &BigUint,
        scale: u32,
        rng: &mut R,
    ) -> Result<Ciphertext, PaillierError> {
        let pk = &self.public;
        pk.check_plaintext(m)?;
        let r = pk.random_unit(rng);
        let rn = self.nonce_power(&r);
        Ok(Ciphertext::new(pk.g_pow(m) * rn % &pk.n_squared, scale))
    }
}

/// Splits `n = pq` given any multiple `e` of `λ(n)`.
fn factor_with_exponent(n: &BigUint, e: &BigUint) -> Option<(BigUint, BigUint)> {
    if e.is_zero() {
        return None;
    }
    let s = e.trailing_zeros().unwrap_or(0);
    let t = e >> s;
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    for a in 2u32..500 {
        let a = BigUint::from(a);
        let g = a.gcd(n);
        if !g.is_one() {
            if &g != n {
                let other = n / &g;
                return Some(order(g, other));
            }
            continue;
        }
        let mut x = a.modpow(&t, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 0..s {
            let y = x.modpow(&BigUint::from(2u32), n);
            if y == one {
                let f = (&x - &one).gcd(n);
                if !f.is_one() && &f != n {
                    let other = n / &f;
                    return Some(order(f, other));
                }
                break;
            }
            if y == n_minus_1 {
                break;
            }
            x = y;
        }
    }
    None
}

fn order(a: BigUint, b: BigUint) -> (BigUint, BigUint) {
    if a > b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Generates a key pair whose modulus has exactly `bits` bits.
pub fn keygen<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<(PublicKey, SecretKey), PaillierError> {
    if bits < 128 {
        return Err(PaillierError::KeyGeneration(format!(
            "{bits}-bit modulus is below the 128-bit minimum"
        )));
    }
    let p_bits = bits / 2;
    let q_bits = bits - p_bits;
    let attempts = 200 * bits as usize;
    for _ in 0..16 {
        let p =
            random_prime(p_bits, attempts, rng).ok_or_else(|| PaillierError::KeyGeneration("no prime found".into()))?;
        let q =
            random_prime(q_bits, attempts, rng).ok_or_else(|| PaillierError::KeyGeneration("no prime found".into()))?;
        if p == q {
            continue;
        }
        let (pk, sk) = SecretKey::from_primes(&p, &q)?;
        debug_assert_eq!(pk.bits(), bits);
        return Ok((pk, sk));
    }
    Err(PaillierError::KeyGeneration("repeated equal primes".into()))
}
