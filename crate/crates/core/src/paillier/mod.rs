//! Paillier cryptosystem with `g = n + 1`, a fixed-point codec for real
//! values, and a length-prefixed binary wire format.

mod codec;
mod keys;
pub mod prime;
mod wire;

pub use codec::{FixedPointCodec, DEFAULT_FRACTION_BITS};
pub use keys::{keygen, Ciphertext, PowTable, PublicKey, SecretKey};
pub use wire::{decode_ciphertexts, encode_ciphertexts, read_biguint, write_biguint, ByteReader};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("plaintext is outside [0, n)")]
    PlaintextOutOfRange,
    #[error("ciphertext is outside [0, n²)")]
    CiphertextOutOfRange,
    #[error("nonce is not a unit modulo n")]
    InvalidNonce,
    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: u32, right: u32 },
    #[error("scale {scale} exceeds the maximum depth {max}")]
    ScaleOverflow { scale: u32, max: u32 },
    #[error("value {0} does not fit the fixed-point working range")]
    EncodingOverflow(String),
    #[error("key generation failed: {0}")]
    KeyGeneration(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("malformed encoding: {0}")]
    Malformed(String),
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}
