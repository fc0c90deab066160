use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::bus::BusLink;
use super::payload::Payload;
use super::train::{unexpected, Session};
use super::{NetError, Phase};
use crate::paillier::Ciphertext;
use crate::rado::Label;
use crate::scalar::Scalar;
use crate::secmath::{
    local_inner_prod_at, sm_add_finish, sm_add_fold, sm_add_start, ObservationKind, PartyId, SecError, SecureWorker,
};

/// Where the other peers' share of the score comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyMode {
    /// Every peer holds its own slice of the same entity's features.
    #[default]
    Partitioned,
    /// Only the querying peer has features; the others score the
    /// coordinator's retained training rado instead.
    RadoSurrogate,
}

impl FromStr for ClassifyMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "partitioned" => Ok(ClassifyMode::Partitioned),
            "rado_surrogate" | "rado-surrogate" => Ok(ClassifyMode::RadoSurrogate),
            _ => Err(format!("unknown classification mode {s}")),
        }
    }
}

/// The peer that scores each coordinate: the lowest id holding it, or `None`
/// when no peer does.
pub fn owners(presence: &[Vec<bool>]) -> Vec<Option<usize>> {
    let d = presence.first().map_or(0, Vec::len);
    (0..d).map(|j| presence.iter().position(|f| f[j])).collect()
}

/// Position of global coordinate `j` inside a peer's `θ_p` slice.
fn slice_index(presence: &[bool], j: usize) -> usize {
    presence[..j].iter().filter(|&&f| f).count()
}

impl Session {
    /// Classifies one entity for peer `querying`. `x` is in the global
    /// feature space without the intercept column.
    ///
    /// Each peer forms an encrypted share of `θᵀx`, the shares are summed
    /// blindly around a ring that `querying` opens and closes, and the
    /// coordinator decrypts only the total and returns its sign.
    pub fn classify<T: Scalar>(&mut self, querying: usize, x: &[T], mode: ClassifyMode) -> Result<Label, NetError> {
        let wrap = |e: NetError| NetError::Aborted {
            phase: Phase::Done,
            source: Box::new(e),
        };
        self.bus.set_protocol("classify");
        let out = self.classify_inner(querying, x, mode).map_err(wrap);
        self.drain_holder();
        out
    }

    fn classify_inner<T: Scalar>(&mut self, querying: usize, x: &[T], mode: ClassifyMode) -> Result<Label, NetError> {
        let peers = self.peers.len();
        if querying >= peers {
            return Err(NetError::Config(format!("no peer {querying}")));
        }
        if x.len() != self.feature_dim {
            return Err(NetError::Config(format!(
                "expected {} features, got {}",
                self.feature_dim,
                x.len()
            )));
        }
        let mut features: Vec<T> = x.to_vec();
        if self.cfg.intercept {
            features.push(T::one());
        }
        for (p, state) in self.peers.iter().enumerate() {
            if state.theta.is_none() {
                return Err(NetError::MissingSlice(p));
            }
        }
        let presence = self.presence();
        let f = self.ctx.fraction_bits();
        let owner = owners(&presence);
        let rado_scale = match mode {
            ClassifyMode::Partitioned => f,
            ClassifyMode::RadoSurrogate => {
                let rado = self
                    .extra_rado
                    .as_ref()
                    .ok_or_else(|| NetError::Config("no retained rado; train the session first".into()))?;
                rado.first().map_or(f, Ciphertext::scale)
            }
        };
        let theta_scale = f;
        let share_scale = rado_scale + theta_scale;

        let mut shares = Vec::with_capacity(peers);
        for q in 0..peers {
            let theta_q = self.peers[q].theta.clone().expect("checked above");
            let local = q == querying || mode == ClassifyMode::Partitioned;
            // Coordinates this peer scores.
            let mine: Vec<usize> = (0..features.len())
                .filter(|&j| {
                    if local && mode == ClassifyMode::RadoSurrogate {
                        presence[q][j]
                    } else if mode == ClassifyMode::RadoSurrogate {
                        !presence[querying][j] && (0..peers).find(|&r| r != querying && presence[r][j]) == Some(q)
                    } else {
                        owner[j] == Some(q)
                    }
                })
                .collect();
            let thetas: Vec<Ciphertext> = mine
                .iter()
                .map(|&j| theta_q[slice_index(&presence[q], j)].clone())
                .collect();
            let share = if mine.is_empty() {
                let rng = &mut self.peers[q].rng;
                self.ctx.pk().encrypt_scaled(&BigUint::default(), share_scale, rng)?
            } else if local {
                let xs: Vec<T> = mine.iter().map(|&j| features[j].clone()).collect();
                let s = local_inner_prod_at(&self.ctx, &xs, f, &thetas)?;
                self.ctx.pk().upscale(&s, share_scale - s.scale())
            } else {
                let rado = self.extra_rado.as_ref().expect("checked above");
                let slice: Vec<Ciphertext> = mine.iter().map(|&j| rado[j].clone()).collect();
                let got = self.bus.send(
                    PartyId::Coordinator,
                    PartyId::Intermediary(q),
                    "classify.rado",
                    &Payload::Ciphertexts(slice),
                )?;
                let Payload::Ciphertexts(slice) = got else {
                    return Err(unexpected("classify.rado", &got));
                };
                let state = &mut self.peers[q];
                let mut link = BusLink {
                    bus: &mut self.bus,
                    holder: &mut self.holder,
                    client: PartyId::Intermediary(q),
                    holder_id: PartyId::Coordinator,
                };
                SecureWorker::new(&self.ctx, &mut link, &mut state.int_rng).sec_inner_prod(&slice, &thetas)?
            };
            shares.push(share);
        }

        // Ring: querying → every other peer in id order → querying.
        let (seed, mut running) = sm_add_start(&self.ctx, share_scale, &mut self.peers[querying].rng)?;
        running = sm_add_fold(&self.ctx, &running, &shares[querying], &mut self.peers[querying].rng)?;
        let mut from = PartyId::Peer(querying);
        for q in (0..peers).filter(|&q| q != querying) {
            let got = self.bus.send(
                from,
                PartyId::Peer(q),
                "smadd.forward",
                &Payload::Ciphertexts(vec![running]),
            )?;
            running = single(got, "smadd.forward")?;
            running = sm_add_fold(&self.ctx, &running, &shares[q], &mut self.peers[q].rng)?;
            from = PartyId::Peer(q);
        }
        if from != PartyId::Peer(querying) {
            let got = self.bus.send(
                from,
                PartyId::Peer(querying),
                "smadd.return",
                &Payload::Ciphertexts(vec![running]),
            )?;
            running = single(got, "smadd.return")?;
        }
        let alpha = sm_add_finish(&self.ctx, &seed, &running)?;

        let got = self.bus.send(
            PartyId::Peer(querying),
            PartyId::Coordinator,
            "classify.alpha",
            &Payload::Ciphertexts(vec![alpha]),
        )?;
        let alpha = single(got, "classify.alpha")?;
        let m = self
            .holder
            .decrypt_logged("classify.alpha", ObservationKind::FinalOutput, &alpha)?;
        let sign = if self.ctx.codec().signed(&m) >= 0.into() { 1 } else { -1 };
        let got = self.bus.send(
            PartyId::Coordinator,
            PartyId::Peer(querying),
            "classify.sign",
            &Payload::Sign(sign),
        )?;
        let Payload::Sign(sign) = got else {
            return Err(unexpected("classify.sign", &got));
        };
        self.audit.record_cleartext(
            PartyId::Peer(querying),
            "classify",
            "classify.sign",
            ObservationKind::FinalOutput,
            1,
        );
        Ok(if sign > 0 { Label::Positive } else { Label::Negative })
    }
}

fn single(got: Payload, step: &str) -> Result<Ciphertext, NetError> {
    match got {
        Payload::Ciphertexts(mut cs) if cs.len() == 1 => Ok(cs.remove(0)),
        Payload::Ciphertexts(cs) => Err(SecError::RingBreak(format!("{step} carried {} values", cs.len())).into()),
        other => Err(unexpected(step, &other)),
    }
}
