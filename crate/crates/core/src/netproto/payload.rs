//! Tagged binary payloads carried by protocol messages.

use crate::linalg::Matrix;
use crate::paillier::{decode_ciphertexts, encode_ciphertexts, ByteReader, Ciphertext, PaillierError, PublicKey};
use crate::secmath::{HolderReply, HolderRequest};

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    PublicKey(PublicKey),
    Ciphertexts(Vec<Ciphertext>),
    Matrix(Matrix<Ciphertext>),
    /// An encrypted dataset: features then labels.
    Examples {
        x: Matrix<Ciphertext>,
        y: Vec<Ciphertext>,
    },
    Presence(Vec<bool>),
    Tokens(Vec<String>),
    Sign(i8),
    /// Which training rado the coordinator keeps for classification.
    RadoRef {
        peer: u32,
        index: u32,
    },
    Request(HolderRequest),
    Reply(HolderReply),
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_be_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &Matrix<Ciphertext>) {
    put_u32(out, m.rows());
    put_u32(out, m.cols());
    encode_ciphertexts(out, m.as_slice());
}

fn read_matrix(r: &mut ByteReader<'_>) -> Result<Matrix<Ciphertext>, PaillierError> {
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    Matrix::from_vec(rows, cols, decode_ciphertexts(r)?).map_err(|e| PaillierError::Malformed(e.to_string()))
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::PublicKey(_) => "public_key",
            Payload::Ciphertexts(_) => "ciphertexts",
            Payload::Matrix(_) => "matrix",
            Payload::Examples { .. } => "examples",
            Payload::Presence(_) => "presence",
            Payload::Tokens(_) => "tokens",
            Payload::Sign(_) => "sign",
            Payload::RadoRef { .. } => "rado_ref",
            Payload::Request(_) => "request",
            Payload::Reply(_) => "reply",
        }
    }

    /// Number of ciphertexts carried.
    pub fn ciphertext_count(&self) -> usize {
        match self {
            Payload::Ciphertexts(cs) => cs.len(),
            Payload::Matrix(m) => m.as_slice().len(),
            Payload::Examples { x, y } => x.as_slice().len() + y.len(),
            Payload::Request(HolderRequest::ElemProd { left, right }) => left.len() + right.len(),
            Payload::Request(HolderRequest::MatProd { left, right, .. }) => {
                left.as_slice().len() + right.as_slice().len()
            }
            Payload::Request(HolderRequest::Rescale { values, .. }) => values.len(),
            Payload::Request(HolderRequest::NormExponent { .. }) => 1,
            Payload::Reply(HolderReply::Ciphertexts(cs)) => cs.len(),
            _ => 0,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Payload::PublicKey(pk) => {
                out.push(1);
                out.extend(pk.to_bytes());
            }
            Payload::Ciphertexts(cs) => {
                out.push(2);
                encode_ciphertexts(&mut out, cs);
            }
            Payload::Matrix(m) => {
                out.push(3);
                put_matrix(&mut out, m);
            }
            Payload::Examples { x, y } => {
                out.push(4);
                put_matrix(&mut out, x);
                encode_ciphertexts(&mut out, y);
            }
            Payload::Presence(bits) => {
                out.push(5);
                put_u32(&mut out, bits.len());
                out.extend(bits.iter().map(|&b| b as u8));
            }
            Payload::Tokens(tokens) => {
                out.push(6);
                put_u32(&mut out, tokens.len());
                for t in tokens {
                    put_u32(&mut out, t.len());
                    out.extend_from_slice(t.as_bytes());
                }
            }
            Payload::Sign(s) => {
                out.push(7);
                out.push(*s as u8);
            }
            Payload::RadoRef { peer, index } => {
                out.push(8);
                out.extend_from_slice(&peer.to_be_bytes());
                out.extend_from_slice(&index.to_be_bytes());
            }
            Payload::Request(req) => {
                out.push(9);
                out.extend(req.to_bytes());
            }
            Payload::Reply(reply) => {
                out.push(10);
                out.extend(reply.to_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PaillierError> {
        let (&tag, body) = bytes
            .split_first()
            .ok_or_else(|| PaillierError::Malformed("empty payload".into()))?;
        let mut r = ByteReader::new(body);
        let payload = match tag {
            1 => return Ok(Payload::PublicKey(PublicKey::from_bytes(body)?)),
            9 => return Ok(Payload::Request(HolderRequest::from_bytes(body)?)),
            10 => return Ok(Payload::Reply(HolderReply::from_bytes(body)?)),
            2 => Payload::Ciphertexts(decode_ciphertexts(&mut r)?),
            3 => Payload::Matrix(read_matrix(&mut r)?),
            4 => Payload::Examples {
                x: read_matrix(&mut r)?,
                y: decode_ciphertexts(&mut r)?,
            },
            5 => {
                let len = r.u32()? as usize;
                let bits = r.take(len)?;
                if bits.iter().any(|&b| b > 1) {
                    return Err(PaillierError::Malformed("presence bit out of range".into()));
                }
                Payload::Presence(bits.iter().map(|&b| b == 1).collect())
            }
            6 => {
                let count = r.u32()? as usize;
                let mut tokens = Vec::with_capacity(count.min(1 << 16));
                for _ in 0..count {
                    let len = r.u32()? as usize;
                    let raw = r.take(len)?;
                    tokens.push(String::from_utf8(raw.to_vec()).map_err(|e| PaillierError::Malformed(e.to_string()))?);
                }
                Payload::Tokens(tokens)
            }
            7 => match r.u8()? as i8 {
                s @ (-1 | 1) => Payload::Sign(s),
                s => return Err(PaillierError::Malformed(format!("sign {s}"))),
            },
            8 => Payload::RadoRef {
                peer: r.u32()?,
                index: r.u32()?,
            },
            t => return Err(PaillierError::Malformed(format!("payload tag {t}"))),
        };
        r.finish()?;
        Ok(payload)
    }
}
