//! Deterministic simulation of the multi-party training and classification
//! protocols.
//!
//! Every party runs in one process on one strand. Whatever crosses a party
//! boundary is serialized onto a [`Bus`], so the transcript is exactly what a
//! networked deployment would send. The coordinator is the only key holder.
//! Each peer has an intermediary sub-role that holds its ciphertexts, and a
//! separate ciphertext-only worker runs the coordinator's secure solver.

mod audit;
mod bus;
mod classify;
mod payload;
mod train;

pub use audit::{AuditEvent, AuditLog, AuditViolation, PartySummary, AGGREGATE_STEPS, MASKED_STEPS, OUTPUT_STEPS};
pub use bus::{Bus, BusLink, ProtocolMessage, ReplaySummary, Transcript, MESSAGE_BUDGET};
pub use classify::{owners, ClassifyMode};
pub use payload::Payload;
pub use train::{peer_signatures, plain_reference, run_train, PeerInput, Session, TrainConfig, TrainMode, TrainReport};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::LearnError;
use crate::linalg::LinalgError;
use crate::paillier::PaillierError;
use crate::rado::RadoError;
use crate::secmath::SecError;
use crate::textfeat::TextError;

/// Stages of a training run, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Keygen,
    Featurize,
    Rado,
    Mean,
    Variance,
    Invert,
    Distribute,
    Done,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::Keygen,
        Phase::Featurize,
        Phase::Rado,
        Phase::Mean,
        Phase::Variance,
        Phase::Invert,
        Phase::Distribute,
        Phase::Done,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Keygen => "keygen",
            Phase::Featurize => "featurize",
            Phase::Rado => "rado",
            Phase::Mean => "mean",
            Phase::Variance => "variance",
            Phase::Invert => "invert",
            Phase::Distribute => "distribute",
            Phase::Done => "done",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Phase::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown phase {s}"))
    }
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("run aborted in phase {phase}: {source}")]
    Aborted {
        phase: Phase,
        #[source]
        source: Box<NetError>,
    },
    #[error("message budget of {0} exhausted")]
    Budget(usize),
    #[error("phase cannot move from {from} back to {to}")]
    PhaseOrder { from: Phase, to: Phase },
    #[error("unexpected payload at {step}: got {got}")]
    UnexpectedPayload { step: String, got: &'static str },
    #[error("peer {0} holds no classifier slice")]
    MissingSlice(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Secure(#[from] SecError),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error(transparent)]
    Rado(#[from] RadoError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("{0}")]
    Io(String),
}

impl NetError {
    /// The phase a run failed in, if it failed inside one.
    pub fn phase(&self) -> Option<Phase> {
        match self {
            NetError::Aborted { phase, .. } => Some(*phase),
            _ => None,
        }
    }
}

/// Independent deterministic stream `stream` under `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
