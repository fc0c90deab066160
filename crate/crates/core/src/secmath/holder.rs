use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{SecError, SecureContext};
use crate::linalg::Matrix;
use crate::paillier::{decode_ciphertexts, encode_ciphertexts, ByteReader, Ciphertext, PaillierError, SecretKey};

/// What the key holder is asked to do with masked ciphertexts.
#[derive(Clone, Debug, PartialEq)]
pub enum HolderRequest {
    /// Decrypt both vectors, multiply elementwise, re-encrypt.
    ElemProd {
        left: Vec<Ciphertext>,
        right: Vec<Ciphertext>,
    },
    /// Decrypt both matrices, multiply, re-encrypt. With `upper_only` only the
    /// entries `i ≤ j` are returned, row by row.
    MatProd {
        left: Matrix<Ciphertext>,
        right: Matrix<Ciphertext>,
        upper_only: bool,
    },
    /// Decrypt, drop the low `scale − to_scale` bits, re-encrypt at `to_scale`.
    Rescale { to_scale: u32, values: Vec<Ciphertext> },
    /// Decrypt one aggregate and return `⌈log₂ v⌉`.
    NormExponent { value: Ciphertext },
}

#[derive(Clone, Debug, PartialEq)]
pub enum HolderReply {
    Ciphertexts(Vec<Ciphertext>),
    Exponent(i32),
    Refused(String),
}

impl HolderRequest {
    /// Step ids of the request and of its reply.
    pub fn step_ids(&self) -> (&'static str, &'static str) {
        match self {
            HolderRequest::ElemProd { .. } => ("elemprod.mask", "elemprod.reply"),
            HolderRequest::MatProd { .. } => ("matprod.mask", "matprod.reply"),
            HolderRequest::Rescale { .. } => ("rescale.mask", "rescale.reply"),
            HolderRequest::NormExponent { .. } => ("inv.norm", "inv.norm.reply"),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            HolderRequest::ElemProd { left, right } => {
                out.push(1);
                encode_ciphertexts(&mut out, left);
                encode_ciphertexts(&mut out, right);
            }
            HolderRequest::MatProd {
                left,
                right,
                upper_only,
            } => {
                out.push(2);
                for dim in [left.rows(), left.cols(), right.cols()] {
                    out.extend_from_slice(&(dim as u32).to_be_bytes());
                }
                out.push(*upper_only as u8);
                encode_ciphertexts(&mut out, left.as_slice());
                encode_ciphertexts(&mut out, right.as_slice());
            }
            HolderRequest::Rescale { to_scale, values } => {
                out.push(3);
                out.push(*to_scale as u8);
                encode_ciphertexts(&mut out, values);
            }
            HolderRequest::NormExponent { value } => {
                out.push(4);
                value.write_to(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PaillierError> {
        let mut r = ByteReader::new(bytes);
        let req = match r.u8()? {
            1 => HolderRequest::ElemProd {
                left: decode_ciphertexts(&mut r)?,
                right: decode_ciphertexts(&mut r)?,
            },
            2 => {
                let d = r.u32()? as usize;
                let k = r.u32()? as usize;
                let e = r.u32()? as usize;
                let upper_only = r.u8()? != 0;
                let left = Matrix::from_vec(d, k, decode_ciphertexts(&mut r)?)
                    .map_err(|e| PaillierError::Malformed(e.to_string()))?;
                let right = Matrix::from_vec(k, e, decode_ciphertexts(&mut r)?)
                    .map_err(|e| PaillierError::Malformed(e.to_string()))?;
                HolderRequest::MatProd {
                    left,
                    right,
                    upper_only,
                }
            }
            3 => HolderRequest::Rescale {
                to_scale: r.u8()? as u32,
                values: decode_ciphertexts(&mut r)?,
            },
            4 => HolderRequest::NormExponent {
                value: Ciphertext::read_from(&mut r)?,
            },
            t => return Err(PaillierError::Malformed(format!("request tag {t}"))),
        };
        r.finish()?;
        Ok(req)
    }
}

impl HolderReply {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            HolderReply::Ciphertexts(cs) => {
                out.push(1);
                encode_ciphertexts(&mut out, cs);
            }
            HolderReply::Exponent(k) => {
                out.push(2);
                out.extend_from_slice(&k.to_be_bytes());
            }
            HolderReply::Refused(msg) => {
                out.push(3);
                out.extend_from_slice(msg.as_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PaillierError> {
        let mut r = ByteReader::new(bytes);
        let reply = match r.u8()? {
            1 => HolderReply::Ciphertexts(decode_ciphertexts(&mut r)?),
            2 => HolderReply::Exponent(r.i32()?),
            3 => {
                let rest = r.take(bytes.len() - 1)?;
                HolderReply::Refused(String::from_utf8_lossy(rest).into_owned())
            }
            t => return Err(PaillierError::Malformed(format!("reply tag {t}"))),
        };
        r.finish()?;
        Ok(reply)
    }

    pub fn into_ciphertexts(self, expected: usize) -> Result<Vec<Ciphertext>, SecError> {
        match self {
            HolderReply::Ciphertexts(cs) if cs.len() == expected => Ok(cs),
            HolderReply::Ciphertexts(cs) => Err(SecError::Protocol(format!(
                "expected {expected} ciphertexts, got {}",
                cs.len()
            ))),
            HolderReply::Refused(msg) => Err(SecError::Protocol(msg)),
            other => Err(SecError::Protocol(format!("unexpected reply {other:?}"))),
        }
    }
}

/// Transport from the worker to the key holder.
pub trait KeyHolderLink {
    fn exchange(&mut self, request: HolderRequest) -> Result<HolderReply, SecError>;
}

/// How a decrypted value relates to the underlying private data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ObservationKind {
    /// Uniformly masked by the sender; independent of the data.
    Masked,
    /// A sum over every peer's contribution.
    Aggregate,
    /// The value the protocol exists to reveal.
    FinalOutput,
    /// Shape or vocabulary information that parties exchange in the clear.
    PublicMetadata,
}

/// One batch of plaintexts a party saw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub step: String,
    pub kind: ObservationKind,
    pub count: usize,
    /// Recorded only when value capture is enabled.
    pub values: Vec<BigUint>,
}

/// The decrypting party. Logs every plaintext it obtains.
pub struct KeyHolder {
    ctx: SecureContext,
    sk: SecretKey,
    rng: ChaCha20Rng,
    capture_values: bool,
    log: Vec<Observation>,
}

impl KeyHolder {
    pub fn new(sk: SecretKey, fraction_bits: u32, seed: u64) -> Result<Self, SecError> {
        let ctx = SecureContext::new(sk.public().clone(), fraction_bits)?;
        Ok(Self {
            ctx,
            sk,
            rng: ChaCha20Rng::seed_from_u64(seed),
            capture_values: false,
            log: Vec::new(),
        })
    }

    /// Keep the decrypted integers themselves in the log, not only counts.
    pub fn capture_values(mut self, on: bool) -> Self {
        self.capture_values = on;
        self
    }

    pub fn context(&self) -> &SecureContext {
        &self.ctx
    }

    pub fn secret_key(&self) -> &SecretKey {
        &self.sk
    }

    pub fn observations(&self) -> &[Observation] {
        &self.log
    }

    pub fn take_observations(&mut self) -> Vec<Observation> {
        std::mem::take(&mut self.log)
    }

    fn record(&mut self, step: &str, kind: ObservationKind, values: &[BigUint]) {
        self.log.push(Observation {
            step: step.to_string(),
            kind,
            count: values.len(),
            values: if self.capture_values {
                values.to_vec()
            } else {
                Vec::new()
            },
        });
    }

    fn decrypt_all(&self, cs: &[Ciphertext]) -> Result<Vec<BigUint>, SecError> {
        cs.iter().map(|c| self.sk.decrypt(c).map_err(SecError::from)).collect()
    }

    /// Decrypts a value the protocol is meant to reveal and logs it.
    pub fn decrypt_logged(&mut self, step: &str, kind: ObservationKind, c: &Ciphertext) -> Result<BigUint, SecError> {
        let m = self.sk.decrypt(c)?;
        self.record(step, kind, std::slice::from_ref(&m));
        Ok(m)
    }

    pub fn decrypt_many_logged(
        &mut self,
        step: &str,
        kind: ObservationKind,
        cs: &[Ciphertext],
    ) -> Result<Vec<BigUint>, SecError> {
        let ms = self.decrypt_all(cs)?;
        self.record(step, kind, &ms);
        Ok(ms)
    }

    fn encrypt(&mut self, m: &BigUint, scale: u32) -> Result<Ciphertext, SecError> {
        Ok(self.sk.encrypt_scaled(m, scale, &mut self.rng)?)
    }

    pub fn handle(&mut self, request: &HolderRequest) -> HolderReply {
        match self.try_handle(request) {
            Ok(reply) => reply,
            Err(e) => HolderReply::Refused(e.to_string()),
        }
    }

    fn try_handle(&mut self, request: &HolderRequest) -> Result<HolderReply, SecError> {
        let (step, _) = request.step_ids();
        let n = self.ctx.pk().n().clone();
        match request {
            HolderRequest::ElemProd { left, right } => {
                if left.len() != right.len() {
                    return Err(SecError::Dimension(format!("{} vs {}", left.len(), right.len())));
                }
                let a = self.decrypt_all(left)?;
                let b = self.decrypt_all(right)?;
                self.record(step, ObservationKind::Masked, &[a.clone(), b.clone()].concat());
                let mut out = Vec::with_capacity(a.len());
                for ((x, y), (cl, cr)) in a.iter().zip(&b).zip(left.iter().zip(right)) {
                    let scale = cl.scale() + cr.scale();
                    self.ctx.check_scale(scale)?;
                    out.push(self.encrypt(&(x * y % &n), scale)?);
                }
                Ok(HolderReply::Ciphertexts(out))
            }
            HolderRequest::MatProd {
                left,
                right,
                upper_only,
            } => {
                if left.cols() != right.rows() {
                    return Err(SecError::Dimension(format!("{:?} × {:?}", left.shape(), right.shape())));
                }
                if *upper_only && left.rows() != right.cols() {
                    return Err(SecError::Dimension("upper-only product must be square".into()));
                }
                let sx = uniform_scale(left.as_slice())?;
                let sy = uniform_scale(right.as_slice())?;
                let scale = sx + sy;
                self.ctx.check_scale(scale)?;
                let x = Matrix::from_vec(left.rows(), left.cols(), self.decrypt_all(left.as_slice())?)
                    .expect("shape preserved");
                let y = Matrix::from_vec(right.rows(), right.cols(), self.decrypt_all(right.as_slice())?)
                    .expect("shape preserved");
                self.record(step, ObservationKind::Masked, &[x.as_slice(), y.as_slice()].concat());
                let mut out = Vec::new();
                for i in 0..x.rows() {
                    let start = if *upper_only { i } else { 0 };
                    for j in start..y.cols() {
                        let mut acc = BigUint::default();
                        for l in 0..x.cols() {
                            acc += &x[(i, l)] * &y[(l, j)];
                        }
                        out.push(self.encrypt(&(acc % &n), scale)?);
                    }
                }
                Ok(HolderReply::Ciphertexts(out))
            }
            HolderRequest::Rescale { to_scale, values } => {
                let zs = self.decrypt_all(values)?;
                self.record(step, ObservationKind::Masked, &zs);
                let mut out = Vec::with_capacity(zs.len());
                for (z, c) in zs.iter().zip(values) {
                    if c.scale() <= *to_scale {
                        return Err(SecError::BadRescale {
                            from: c.scale(),
                            to: *to_scale,
                        });
                    }
                    let shifted = z >> (c.scale() - to_scale);
                    out.push(self.encrypt(&shifted, *to_scale)?);
                }
                Ok(HolderReply::Ciphertexts(out))
            }
            HolderRequest::NormExponent { value } => {
                let m = self.decrypt_logged(step, ObservationKind::Aggregate, value)?;
                let v: f64 = self.ctx.codec().decode(&m, value.scale());
                if v <= 0.0 || !v.is_finite() {
                    return Err(SecError::Protocol("norm is not positive".into()));
                }
                Ok(HolderReply::Exponent(v.log2().ceil() as i32))
            }
        }
    }
}

impl KeyHolderLink for KeyHolder {
    fn exchange(&mut self, request: HolderRequest) -> Result<HolderReply, SecError> {
        Ok(self.handle(&request))
    }
}

pub(crate) fn uniform_scale(cs: &[Ciphertext]) -> Result<u32, SecError> {
    let first = cs.first().map_or(0, Ciphertext::scale);
    if let Some(c) = cs.iter().find(|c| c.scale() != first) {
        return Err(SecError::ScaleMismatch(first, c.scale()));
    }
    Ok(first)
}
