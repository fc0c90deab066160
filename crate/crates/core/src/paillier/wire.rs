//! Length-prefixed big-endian encodings.
//!
//! Integers are a `u32` byte count followed by the magnitude in big-endian
//! order. A ciphertext is its value followed by a one-byte scale.

use num_bigint::BigUint;

use super::{Ciphertext, PaillierError, PublicKey, SecretKey};

pub fn write_biguint(out: &mut Vec<u8>, v: &BigUint) {
    let bytes = v.to_bytes_be();
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&bytes);
}

/// Cursor over a byte slice.
pub struct ByteReader<'a> {
    buf: &'a [u8],
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn take(&mut self, k: usize) -> Result<&'a [u8], PaillierError> {
        if self.buf.len() < k {
            return Err(PaillierError::Malformed(format!(
                "need {k} bytes, {} left",
                self.buf.len()
            )));
        }
        let (head, tail) = self.buf.split_at(k);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, PaillierError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, PaillierError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn i32(&mut self) -> Result<i32, PaillierError> {
        Ok(self.u32()? as i32)
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(self) -> Result<(), PaillierError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(PaillierError::Malformed(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

pub fn read_biguint(r: &mut ByteReader<'_>) -> Result<BigUint, PaillierError> {
    let len = r.u32()? as usize;
    Ok(BigUint::from_bytes_be(r.take(len)?))
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_biguint(&mut out, self.n());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PaillierError> {
        let mut r = ByteReader::new(bytes);
        let n = read_biguint(&mut r)?;
        r.finish()?;
        PublicKey::new(n)
    }
}

impl SecretKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_biguint(&mut out, self.public().n());
        write_biguint(&mut out, self.lambda());
        write_biguint(&mut out, self.mu());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PaillierError> {
        let mut r = ByteReader::new(bytes);
        let n = read_biguint(&mut r)?;
        let lambda = read_biguint(&mut r)?;
        let mu = read_biguint(&mut r)?;
        r.finish()?;
        SecretKey::from_parts(n, lambda, mu)
    }
}

impl Ciphertext {
    pub fn write_to(&self, out: &mut Vec<u8>) {
        write_biguint(out, self.value());
        out.push(self.scale() as u8);
    }

    pub fn read_from(r: &mut ByteReader<'_>) -> Result<Self, PaillierError> {
        let value = read_biguint(r)?;
        let scale = r.u8()? as u32;
        Ok(Ciphertext::new(value, scale))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PaillierError> {
        let mut r = ByteReader::new(bytes);
        let c = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(c)
    }
}

/// `u32` count followed by the ciphertexts.
pub fn encode_ciphertexts(out: &mut Vec<u8>, cs: &[Ciphertext]) {
    out.extend_from_slice(&(cs.len() as u32).to_be_bytes());
    for c in cs {
        c.write_to(out);
    }
}

pub fn decode_ciphertexts(r: &mut ByteReader<'_>) -> Result<Vec<Ciphertext>, PaillierError> {
    let count = r.u32()? as usize;
    let mut cs = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        cs.push(Ciphertext::read_from(r)?);
    }
    Ok(cs)
}
