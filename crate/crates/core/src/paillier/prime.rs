//! Probabilistic prime generation.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239,
    241, 251,
];

pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Miller–Rabin with `rounds` random bases, preceded by trial division.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    if let Some(small) = n.to_u32() {
        if small < 2 {
            return false;
        }
        if SMALL_PRIMES.contains(&small) {
            return true;
        }
    }
    for &p in &SMALL_PRIMES {
        if (n % p).is_zero() {
            return false;
        }
    }
    if n < &BigUint::from(251u32 * 251) {
        return true;
    }

    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let two = BigUint::from(2u32);

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// Draws a random prime of exactly `bits` bits with the top two bits set, so
/// that the product of two such primes has exactly twice as many bits.
pub fn random_prime<R: RngCore + ?Sized>(bits: u64, max_attempts: usize, rng: &mut R) -> Option<BigUint> {
    assert!(bits >= 8, "prime size too small");
    for _ in 0..max_attempts {
        let mut c = rng.gen_biguint(bits);
        c.set_bit(bits - 1, true);
        c.set_bit(bits - 2, true);
        c.set_bit(0, true);
        if is_probable_prime(&c, MILLER_RABIN_ROUNDS, rng) {
            return Some(c);
        }
    }
    None
}

pub(crate) fn lcm(a: &BigUint, b: &BigUint) -> BigUint {
    a.lcm(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sieve(limit: usize) -> Vec<bool> {
        let mut is = vec![true; limit];
        is[0] = false;
        is[1] = false;
        for i in 2..limit {
            if is[i] {
                let mut j = i * i;
                while j < limit {
                    is[j] = false;
                    j += i;
                }
            }
        }
        is
    }

    #[test]
    fn agrees_with_sieve_below_100k() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let table = sieve(100_000);
        for (k, &expected) in table.iter().enumerate() {
            assert_eq!(is_probable_prime(&BigUint::from(k), 8, &mut rng), expected, "{k}");
        }
    }

    #[test]
    fn rejects_carmichael_numbers() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for c in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265, 321197185] {
            assert!(!is_probable_prime(&BigUint::from(c), 40, &mut rng), "{c}");
        }
    }

    #[test]
    fn known_large_prime() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let m127 = (BigUint::one() << 127u32) - 1u32;
        assert!(is_probable_prime(&m127, 40, &mut rng));
        assert!(!is_probable_prime(&(&m127 * &m127), 40, &mut rng));
    }

    #[test]
    fn random_prime_has_requested_size() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let p = random_prime(96, 10_000, &mut rng).unwrap();
        assert_eq!(p.bits(), 96);
        assert!(p.bit(94));
    }
}
