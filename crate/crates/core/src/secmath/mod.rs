//! Two-party secure arithmetic between a public worker, who holds only
//! ciphertexts, and the key holder, who can decrypt.
//!
//! Every interactive operation follows the same pattern: the worker adds a
//! fresh uniform mask, the key holder decrypts the masked value, computes in
//! the clear and re-encrypts, and the worker removes the mask
//! homomorphically. The multi-party blind sum lives in [`smadd`].

mod holder;
mod inverse;
pub mod smadd;
mod worker;

pub use holder::{HolderReply, HolderRequest, KeyHolder, KeyHolderLink, Observation, ObservationKind};
pub use inverse::InverseParams;
pub use smadd::{sm_add, sm_add_finish, sm_add_fold, sm_add_start, sm_add_start_with_mask, SmAddSeed};
pub use worker::{local_inner_prod, local_inner_prod_at, SecureWorker};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paillier::{FixedPointCodec, PaillierError, PublicKey};

#[derive(Debug, Error)]
pub enum SecError {
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error("scale {scale} exceeds the maximum depth {max}; rescale first")]
    ScaleOverflow { scale: u32, max: u32 },
    #[error("non-uniform scales: {0} vs {1}")]
    ScaleMismatch(u32, u32),
    #[error("rescale must lower the scale: {from} → {to}")]
    BadRescale { from: u32, to: u32 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("ring broken: {0}")]
    RingBreak(String),
}

/// Public parameters shared by every party of one protocol instance.
#[derive(Clone, Debug)]
pub struct SecureContext {
    pk: PublicKey,
    codec: FixedPointCodec,
}

impl SecureContext {
    pub fn new(pk: PublicKey, fraction_bits: u32) -> Result<Self, SecError> {
        let codec = FixedPointCodec::new(&pk, fraction_bits)?;
        Ok(Self { pk, codec })
    }

    pub fn pk(&self) -> &PublicKey {
        &self.pk
    }

    pub fn codec(&self) -> &FixedPointCodec {
        &self.codec
    }

    pub fn fraction_bits(&self) -> u32 {
        self.codec.fraction_bits()
    }

    pub(crate) fn check_scale(&self, scale: u32) -> Result<(), SecError> {
        self.codec.check_scale(scale).map_err(|_| SecError::ScaleOverflow {
            scale,
            max: self.codec.max_scale(),
        })
    }
}

/// Identity of a simulated party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyId {
    Coordinator,
    /// Ciphertext-only helper that runs the coordinator's secure solver.
    Worker,
    Peer(usize),
    /// Peer-local sub-role that only ever handles ciphertexts.
    Intermediary(usize),
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Coordinator => write!(f, "coordinator"),
            PartyId::Worker => write!(f, "worker"),
            PartyId::Peer(p) => write!(f, "peer{p}"),
            PartyId::Intermediary(p) => write!(f, "peer{p}.int"),
        }
    }
}

impl FromStr for PartyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "coordinator" => Ok(PartyId::Coordinator),
            "worker" => Ok(PartyId::Worker),
            _ => {
                let rest = s.strip_prefix("peer").ok_or_else(|| format!("unknown party {s}"))?;
                let (num, int) = match rest.strip_suffix(".int") {
                    Some(n) => (n, true),
                    None => (rest, false),
                };
                let p = num.parse().map_err(|_| format!("unknown party {s}"))?;
                Ok(if int {
                    PartyId::Intermediary(p)
                } else {
                    PartyId::Peer(p)
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    PublicWorker,
    KeyHolder,
    Coordinator,
    Peer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartyRole {
    pub id: PartyId,
    pub role: Role,
}
