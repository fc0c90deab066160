use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::audit::AuditLog;
use super::bus::{Bus, BusLink, Transcript, MESSAGE_BUDGET};
use super::payload::Payload;
use super::{stream_rng, NetError, Phase};
use crate::learners::{CenterMode, Regularizer};
use crate::linalg::Matrix;
use crate::paillier::{keygen, Ciphertext};
use crate::rado::{encrypt_examples, sample_signatures, Dataset, EncryptedExamples, PlainSigmaRados, Signature};
use crate::scalar::Scalar;
use crate::secmath::{
    sm_add_finish, sm_add_fold, sm_add_start, InverseParams, KeyHolder, ObservationKind, PartyId, SecError,
    SecureContext, SecureWorker, SmAddSeed,
};
use crate::textfeat::{local_text, token_set, Dictionary, LabeledCorpus};

const STREAM_KEYGEN: u64 = 1;
const STREAM_HOLDER: u64 = 2;
const STREAM_WORKER: u64 = 3;
const STREAM_COORDINATOR: u64 = 4;
const STREAM_PEER: u64 = 1_000;
const STREAM_SIGNATURES: u64 = 1_000_000;

/// How much of training happens under encryption.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Rados and their aggregates are encrypted; the coordinator decrypts the
    /// two aggregates and solves for `θ` in the clear.
    EncRados,
    /// `θ` is also computed under encryption and never decrypted.
    #[default]
    EncFull,
}

impl FromStr for TrainMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "enc_rados" => Ok(TrainMode::EncRados),
            "enc_full" => Ok(TrainMode::EncFull),
            _ => Err(format!("unknown training mode {s}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub key_bits: u64,
    pub fraction_bits: u32,
    /// Regularization weight on coordinates fewer than half the peers hold.
    pub epsilon: f64,
    /// Newton–Schulz iterations.
    pub iterations: usize,
    pub rados_per_peer: usize,
    pub seed: u64,
    pub center: CenterMode,
    /// Append a constant feature held by every peer.
    pub intercept: bool,
    /// Keep decrypted values in the audit log, not only their counts.
    pub capture_values: bool,
    pub message_budget: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::EncFull,
            key_bits: 512,
            fraction_bits: 32,
            epsilon: 1e-3,
            iterations: 32,
            rados_per_peer: 25,
            seed: 0,
            center: CenterMode::Sum,
            intercept: false,
            capture_values: false,
            message_budget: MESSAGE_BUDGET,
        }
    }
}

/// One peer's private data.
#[derive(Clone, Debug)]
pub enum PeerInput<T> {
    /// Already vectorized over the global feature space.
    Numeric(Dataset<T>),
    /// Documents, vectorized against the shared dictionary during training.
    Text(LabeledCorpus),
}

/// The signatures peer `peer`'s intermediary draws; public so a plaintext
/// run can reproduce the same rados.
pub fn peer_signatures(seed: u64, peer: usize, m: usize, k: usize) -> Result<Vec<Signature>, NetError> {
    let mut rng = stream_rng(seed, STREAM_SIGNATURES + peer as u64);
    Ok(sample_signatures(m, k, &mut rng)?)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub phase_seconds: BTreeMap<String, f64>,
    pub messages: usize,
    pub dim: usize,
    pub total_rados: usize,
    /// Tokens each peer dropped as out of vocabulary (text input only).
    pub out_of_vocabulary: Vec<usize>,
    /// Which training rado the coordinator kept: `(peer, index)`.
    pub extra_rado: Option<(usize, usize)>,
}

pub(super) struct PeerState {
    pub(super) presence: Vec<bool>,
    pub(super) rng: ChaCha20Rng,
    /// Randomness of the peer's intermediary sub-role.
    pub(super) int_rng: ChaCha20Rng,
    pub(super) theta: Option<Vec<Ciphertext>>,
    rados: Vec<Vec<Ciphertext>>,
}

/// Everything the parties hold after (or during) training.
pub struct Session {
    pub(super) cfg: TrainConfig,
    pub(super) ctx: SecureContext,
    pub(super) holder: KeyHolder,
    pub(super) bus: Bus,
    pub(super) audit: AuditLog,
    pub(super) coordinator_rng: ChaCha20Rng,
    pub(super) worker_rng: ChaCha20Rng,
    pub(super) peers: Vec<PeerState>,
    /// Dimension before the intercept column.
    pub(super) feature_dim: usize,
    pub(super) dictionary: Option<Dictionary>,
    pub(super) theta: Option<Vec<Ciphertext>>,
    pub(super) extra_rado: Option<Vec<Ciphertext>>,
    report: TrainReport,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("peers", &self.peers.len())
            .field("dim", &self.dim())
            .field("phase", &self.bus.phase())
            .field("messages", &self.bus.sent())
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn context(&self) -> &SecureContext {
        &self.ctx
    }

    pub fn peer_count(&self) -> usize {
        self.peers.len()
    }

    /// Global dimension including the intercept column.
    pub fn dim(&self) -> usize {
        self.feature_dim + self.cfg.intercept as usize
    }

    pub fn presence(&self) -> Vec<Vec<bool>> {
        self.peers.iter().map(|p| p.presence.clone()).collect()
    }

    pub fn dictionary(&self) -> Option<&Dictionary> {
        self.dictionary.as_ref()
    }

    pub fn phase(&self) -> Phase {
        self.bus.phase()
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn transcript(&self) -> Transcript {
        self.bus.transcript()
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn encrypted_theta(&self) -> Option<&[Ciphertext]> {
        self.theta.as_deref()
    }

    pub fn theta_slice(&self, peer: usize) -> Option<&[Ciphertext]> {
        self.peers.get(peer)?.theta.as_deref()
    }

    /// Decrypts `θ` with the coordinator's key for evaluation. This is an
    /// experimenter's hook outside the protocol and is not audited.
    pub fn reveal_theta(&self) -> Result<Vec<f64>, NetError> {
        let theta = self.theta.as_ref().ok_or(NetError::MissingSlice(0))?;
        Ok(self.ctx.codec().decrypt_vector(self.holder.secret_key(), theta)?)
    }

    /// The retained training rado in the clear. Same caveat as
    /// [`Session::reveal_theta`].
    pub fn reveal_extra_rado(&self) -> Result<Option<Vec<f64>>, NetError> {
        match &self.extra_rado {
            Some(r) => Ok(Some(self.ctx.codec().decrypt_vector(self.holder.secret_key(), r)?)),
            None => Ok(None),
        }
    }

    /// Installs a known rado as the retained one, for sessions built with
    /// [`Session::with_plain_theta`].
    pub fn set_plain_extra_rado<T: Scalar>(&mut self, rado: &[T]) -> Result<(), NetError> {
        let d = self.dim();
        if rado.len() != d {
            return Err(NetError::Config(format!(
                "rado has {} coordinates, expected {d}",
                rado.len()
            )));
        }
        let codec = self.ctx.codec().clone();
        let sk = self.holder.secret_key().clone();
        let scale = codec.fraction_bits() + 1;
        let enc = rado
            .iter()
            .map(|v| Ok(sk.encrypt_scaled(&codec.encode_at(v, scale)?, scale, &mut self.coordinator_rng)?))
            .collect::<Result<Vec<_>, NetError>>()?;
        self.extra_rado = Some(enc);
        Ok(())
    }

    fn start(cfg: &TrainConfig, peers: usize) -> Result<Self, NetError> {
        if peers == 0 {
            return Err(NetError::Config("at least one peer is required".into()));
        }
        if cfg.rados_per_peer == 0 || cfg.iterations == 0 {
            return Err(NetError::Config(
                "rados per peer and iterations must be positive".into(),
            ));
        }
        if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
            return Err(NetError::Config(format!("epsilon {} outside (0, 1]", cfg.epsilon)));
        }
        let mut bus = Bus::new(cfg.message_budget);
        bus.set_protocol("train");
        let (pk, sk) = keygen(cfg.key_bits, &mut stream_rng(cfg.seed, STREAM_KEYGEN))?;
        let ctx = SecureContext::new(pk.clone(), cfg.fraction_bits)?;
        let holder = KeyHolder::new(sk, cfg.fraction_bits, stream_rng(cfg.seed, STREAM_HOLDER).gen())?
            .capture_values(cfg.capture_values);
        let mut audit = AuditLog::default();
        let mut states = Vec::with_capacity(peers);
        for p in 0..peers {
            let delivered = bus.send(
                PartyId::Coordinator,
                PartyId::Peer(p),
                "keygen.pk",
                &Payload::PublicKey(pk.clone()),
            )?;
            if delivered != Payload::PublicKey(pk.clone()) {
                return Err(NetError::Transcript("public key corrupted in transit".into()));
            }
            audit.record_cleartext(
                PartyId::Peer(p),
                "train",
                "keygen.pk",
                ObservationKind::PublicMetadata,
                1,
            );
            states.push(PeerState {
                presence: Vec::new(),
                rng: stream_rng(cfg.seed, STREAM_PEER + 2 * p as u64),
                int_rng: stream_rng(cfg.seed, STREAM_PEER + 2 * p as u64 + 1),
                theta: None,
                rados: Vec::new(),
            });
        }
        Ok(Self {
            cfg: cfg.clone(),
            ctx,
            holder,
            bus,
            audit,
            coordinator_rng: stream_rng(cfg.seed, STREAM_COORDINATOR),
            worker_rng: stream_rng(cfg.seed, STREAM_WORKER),
            peers: states,
            feature_dim: 0,
            dictionary: None,
            theta: None,
            extra_rado: None,
            report: TrainReport::default(),
        })
    }

    /// Runs `body` as phase `phase`, timing it and tagging any failure.
    fn phase_step<R>(
        &mut self,
        phase: Phase,
        body: impl FnOnce(&mut Self) -> Result<R, NetError>,
    ) -> Result<R, NetError> {
        let wrap = |e: NetError| NetError::Aborted {
            phase,
            source: Box::new(e),
        };
        self.bus.advance(phase).map_err(wrap)?;
        let started = Instant::now();
        let out = body(self);
        let protocol = self.bus.protocol().to_string();
        let seen = self.holder.take_observations();
        self.audit.record_decryptions(PartyId::Coordinator, &protocol, seen);
        *self.report.phase_seconds.entry(phase.name().to_string()).or_default() += started.elapsed().as_secs_f64();
        out.map_err(wrap)
    }

    pub(super) fn drain_holder(&mut self) {
        let protocol = self.bus.protocol().to_string();
        let seen = self.holder.take_observations();
        self.audit.record_decryptions(PartyId::Coordinator, &protocol, seen);
    }

    /// Each peer's `(X_p, y_p)` and `f_p` over the global feature space.
    fn featurize<T: Scalar>(&mut self, inputs: &[PeerInput<T>]) -> Result<Vec<Dataset<T>>, NetError> {
        let text = matches!(inputs[0], PeerInput::Text(_));
        if inputs.iter().any(|i| matches!(i, PeerInput::Text(_)) != text) {
            return Err(NetError::Config(
                "peers must all supply text or all supply numeric data".into(),
            ));
        }
        let mut datasets = Vec::with_capacity(inputs.len());
        let mut presence = Vec::with_capacity(inputs.len());
        if text {
            let corpora: Vec<&LabeledCorpus> = inputs
                .iter()
                .map(|i| match i {
                    PeerInput::Text(c) => c,
                    PeerInput::Numeric(_) => unreachable!("checked above"),
                })
                .collect();
            // The union dictionary discloses each peer's vocabulary to the
            // coordinator; it is logged as public metadata.
            let mut union = Vec::new();
            for (p, corpus) in corpora.iter().enumerate() {
                let tokens: Vec<String> = token_set(corpus).into_iter().collect();
                let got = self.bus.send(
                    PartyId::Peer(p),
                    PartyId::Coordinator,
                    "dict.tokens",
                    &Payload::Tokens(tokens),
                )?;
                let Payload::Tokens(tokens) = got else {
                    return Err(unexpected("dict.tokens", &got));
                };
                self.audit.record_cleartext(
                    PartyId::Coordinator,
                    "train",
                    "dict.tokens",
                    ObservationKind::PublicMetadata,
                    tokens.len(),
                );
                union.extend(tokens);
            }
            let dict = Dictionary::from_tokens(union);
            self.report.out_of_vocabulary = Vec::with_capacity(corpora.len());
            for (p, corpus) in corpora.iter().enumerate() {
                let got = self.bus.send(
                    PartyId::Coordinator,
                    PartyId::Peer(p),
                    "dict.broadcast",
                    &Payload::Tokens(dict.tokens().to_vec()),
                )?;
                let Payload::Tokens(tokens) = got else {
                    return Err(unexpected("dict.broadcast", &got));
                };
                self.audit.record_cleartext(
                    PartyId::Peer(p),
                    "train",
                    "dict.broadcast",
                    ObservationKind::PublicMetadata,
                    tokens.len(),
                );
                let local = local_text::<T>(&Dictionary::from_tokens(tokens), corpus)?;
                self.report.out_of_vocabulary.push(local.out_of_vocabulary);
                presence.push(local.presence);
                datasets.push(local.dataset);
            }
            self.dictionary = Some(dict);
        } else {
            for input in inputs {
                let PeerInput::Numeric(ds) = input else {
                    unreachable!("checked above")
                };
                if ds.d() != inputs_dim(inputs) {
                    return Err(NetError::Config("peers disagree on the feature dimension".into()));
                }
                presence.push(ds.feature_presence());
                datasets.push(ds.clone());
            }
        }
        self.feature_dim = datasets[0].d();
        if self.cfg.intercept {
            for (ds, f) in datasets.iter_mut().zip(presence.iter_mut()) {
                *ds = ds.with_intercept();
                f.push(true);
            }
        }
        for (p, f) in presence.into_iter().enumerate() {
            let got = self.bus.send(
                PartyId::Peer(p),
                PartyId::Coordinator,
                "featurize.presence",
                &Payload::Presence(f),
            )?;
            let Payload::Presence(f) = got else {
                return Err(unexpected("featurize.presence", &got));
            };
            self.audit.record_cleartext(
                PartyId::Coordinator,
                "train",
                "featurize.presence",
                ObservationKind::PublicMetadata,
                f.len(),
            );
            self.peers[p].presence = f;
        }
        Ok(datasets)
    }

    /// Peers encrypt their data for their intermediaries, which build the
    /// encrypted rados and their local sums `⟦π_(p)⟧`.
    fn build_rados<T: Scalar>(&mut self, datasets: &[Dataset<T>]) -> Result<Vec<Vec<Ciphertext>>, NetError> {
        let mut partials = Vec::with_capacity(datasets.len());
        for (p, ds) in datasets.iter().enumerate() {
            let enc = encrypt_examples(&self.ctx, ds, &mut self.peers[p].rng)?;
            let got = self.bus.send(
                PartyId::Peer(p),
                PartyId::Intermediary(p),
                "featurize.encrypted",
                &Payload::Examples { x: enc.x, y: enc.y },
            )?;
            let Payload::Examples { x, y } = got else {
                return Err(unexpected("featurize.encrypted", &got));
            };
            let enc = EncryptedExamples { x, y };
            let sigs = peer_signatures(self.cfg.seed, p, enc.m(), self.cfg.rados_per_peer)?;
            let state = &mut self.peers[p];
            let mut link = BusLink {
                bus: &mut self.bus,
                holder: &mut self.holder,
                client: PartyId::Intermediary(p),
                holder_id: PartyId::Coordinator,
            };
            let mut worker = SecureWorker::new(&self.ctx, &mut link, &mut state.int_rng);
            let builder = PlainSigmaRados::new(&mut worker, &enc)?;
            state.rados = sigs
                .iter()
                .map(|s| builder.rado(&self.ctx, s))
                .collect::<Result<_, _>>()?;
            partials.push(sum_vectors(&self.ctx, &state.rados)?);
        }
        Ok(partials)
    }

    /// Blind ring sum of one vector per intermediary, opened and closed by
    /// the coordinator.
    fn ring_sum(&mut self, contributions: &[Vec<Ciphertext>], step: &str) -> Result<Vec<Ciphertext>, NetError> {
        let scale = contributions[0]
            .first()
            .ok_or_else(|| SecError::RingBreak("empty contribution".into()))?
            .scale();
        let mut seeds: Vec<SmAddSeed> = Vec::new();
        let mut running = Vec::new();
        for _ in 0..contributions[0].len() {
            let (seed, c) = sm_add_start(&self.ctx, scale, &mut self.coordinator_rng)?;
            seeds.push(seed);
            running.push(c);
        }
        let mut from = PartyId::Coordinator;
        for (p, contribution) in contributions.iter().enumerate() {
            let to = PartyId::Intermediary(p);
            let got = self
                .bus
                .send(from, to, &format!("{step}.forward"), &Payload::Ciphertexts(running))?;
            let Payload::Ciphertexts(received) = got else {
                return Err(unexpected(step, &got));
            };
            if received.len() != contribution.len() {
                return Err(SecError::RingBreak(format!("{to} received {} values", received.len())).into());
            }
            running = received
                .iter()
                .zip(contribution)
                .map(|(r, c)| sm_add_fold(&self.ctx, r, c, &mut self.peers[p].int_rng))
                .collect::<Result<_, _>>()?;
            from = to;
        }
        let got = self.bus.send(
            from,
            PartyId::Coordinator,
            &format!("{step}.return"),
            &Payload::Ciphertexts(running),
        )?;
        let Payload::Ciphertexts(total) = got else {
            return Err(unexpected(step, &got));
        };
        Ok(total
            .iter()
            .zip(&seeds)
            .map(|(c, s)| sm_add_finish(&self.ctx, s, c))
            .collect::<Result<_, _>>()?)
    }

    /// `⟦b⟧` from the per-peer sums, broadcast to every intermediary.
    fn mean(&mut self, partials: &[Vec<Ciphertext>]) -> Result<Vec<Ciphertext>, NetError> {
        let mut b = self.ring_sum(partials, "smadd")?;
        if self.cfg.center == CenterMode::Mean {
            // Dividing by the public rado count needs a rescale, which the
            // ciphertext-only worker runs against the coordinator.
            let got = self.bus.send(
                PartyId::Coordinator,
                PartyId::Worker,
                "mean.request",
                &Payload::Ciphertexts(b),
            )?;
            let Payload::Ciphertexts(sum) = got else {
                return Err(unexpected("mean.request", &got));
            };
            let f = self.ctx.fraction_bits();
            let total = self.report.total_rados as f64;
            let factor = BigInt::from((2f64.powi(f as i32) / total).round() as u64);
            let scaled: Vec<Ciphertext> = sum
                .iter()
                .map(|c| self.ctx.pk().hom_scalar_mul(&factor, c).with_scale(c.scale() + f))
                .collect();
            let mut link = BusLink {
                bus: &mut self.bus,
                holder: &mut self.holder,
                client: PartyId::Worker,
                holder_id: PartyId::Coordinator,
            };
            let target = sum[0].scale();
            let mean = SecureWorker::new(&self.ctx, &mut link, &mut self.worker_rng).rescale(&scaled, target)?;
            let got = self.bus.send(
                PartyId::Worker,
                PartyId::Coordinator,
                "mean.result",
                &Payload::Ciphertexts(mean),
            )?;
            let Payload::Ciphertexts(mean) = got else {
                return Err(unexpected("mean.result", &got));
            };
            b = mean;
        }
        let mut delivered = Vec::new();
        for p in 0..self.peers.len() {
            let got = self.bus.send(
                PartyId::Coordinator,
                PartyId::Intermediary(p),
                "mean.broadcast",
                &Payload::Ciphertexts(b.clone()),
            )?;
            let Payload::Ciphertexts(v) = got else {
                return Err(unexpected("mean.broadcast", &got));
            };
            delivered = v;
        }
        Ok(delivered)
    }

    /// `⟦A⟧ = ½ Σ_p Σ_i (π_i − b)(π_i − b)ᵀ`, summed over the upper triangle.
    fn variance(&mut self, b: &[Ciphertext]) -> Result<Matrix<Ciphertext>, NetError> {
        let d = b.len();
        let pk = self.ctx.pk().clone();
        let mut partials = Vec::with_capacity(self.peers.len());
        for p in 0..self.peers.len() {
            let state = &mut self.peers[p];
            let mut link = BusLink {
                bus: &mut self.bus,
                holder: &mut self.holder,
                client: PartyId::Intermediary(p),
                holder_id: PartyId::Coordinator,
            };
            let mut worker = SecureWorker::new(&self.ctx, &mut link, &mut state.int_rng);
            let mut acc: Option<Vec<Ciphertext>> = None;
            for pi in &state.rados {
                let u = pi
                    .iter()
                    .zip(b)
                    .map(|(x, m)| pk.hom_sub(x, m))
                    .collect::<Result<Vec<_>, _>>()?;
                let outer = worker.sec_outer_prod(&u, &u)?;
                let upper: Vec<Ciphertext> = (0..d)
                    .flat_map(|i| (i..d).map(move |j| (i, j)))
                    .map(|(i, j)| outer[(i, j)].clone())
                    .collect();
                acc = Some(match acc {
                    None => upper,
                    Some(prev) => prev
                        .iter()
                        .zip(&upper)
                        .map(|(x, y)| pk.hom_add(x, y))
                        .collect::<Result<_, _>>()?,
                });
            }
            partials.push(acc.ok_or(SecError::RingBreak(format!("peer {p} has no rados")))?);
        }
        let total = self.ring_sum(&partials, "smadd")?;
        let mut upper = total.into_iter();
        let mut slots: Vec<Option<Ciphertext>> = vec![None; d * d];
        for i in 0..d {
            for j in i..d {
                let c = upper.next().expect("upper triangle size");
                // Reading the sum one bit further right applies the ½.
                let half = c.with_scale(c.scale() + 1);
                slots[j * d + i] = Some(half.clone());
                slots[i * d + j] = Some(half);
            }
        }
        Ok(Matrix::from_vec(
            d,
            d,
            slots.into_iter().map(|c| c.expect("filled")).collect(),
        )?)
    }

    fn regularizer(&self) -> Result<Regularizer, NetError> {
        Ok(Regularizer::from_presence(self.cfg.epsilon, &self.presence())?)
    }

    /// `⟦θ⟧ = ⟦(Γ + A)⁻¹ b⟧` at the fraction bits.
    fn invert(&mut self, a: &Matrix<Ciphertext>, b: &[Ciphertext]) -> Result<Vec<Ciphertext>, NetError> {
        let d = b.len();
        let f = self.ctx.fraction_bits();
        let sa = a[(0, 0)].scale();
        let gamma: Vec<f64> = self.regularizer()?.diagonal();
        match self.cfg.mode {
            TrainMode::EncFull => {
                let codec = self.ctx.codec();
                let mut system = a.clone();
                for (j, g) in gamma.iter().enumerate() {
                    let k = codec.signed(&codec.encode_at(g, sa)?);
                    system[(j, j)] = self.ctx.pk().add_plain(&a[(j, j)], &k);
                }
                let got = self.bus.send(
                    PartyId::Coordinator,
                    PartyId::Worker,
                    "invert.request",
                    &Payload::Matrix(system),
                )?;
                let Payload::Matrix(system) = got else {
                    return Err(unexpected("invert.request", &got));
                };
                let got = self.bus.send(
                    PartyId::Coordinator,
                    PartyId::Worker,
                    "invert.rhs",
                    &Payload::Ciphertexts(b.to_vec()),
                )?;
                let Payload::Ciphertexts(rhs) = got else {
                    return Err(unexpected("invert.rhs", &got));
                };
                // The upper-triangle variant drifts off the commuting subspace
                // on ill-conditioned systems, so the full products are used.
                let params = InverseParams {
                    iterations: self.cfg.iterations,
                    symmetric: false,
                };
                let mut link = BusLink {
                    bus: &mut self.bus,
                    holder: &mut self.holder,
                    client: PartyId::Worker,
                    holder_id: PartyId::Coordinator,
                };
                let mut worker = SecureWorker::new(&self.ctx, &mut link, &mut self.worker_rng);
                let v = worker.sec_inv(&system, &params)?;
                let theta = worker.sec_mat_prod(&v, &Matrix::column_vector(rhs))?;
                let theta = worker.rescale(theta.as_slice(), f)?;
                let got = self.bus.send(
                    PartyId::Worker,
                    PartyId::Coordinator,
                    "invert.result",
                    &Payload::Ciphertexts(theta),
                )?;
                match got {
                    Payload::Ciphertexts(theta) => Ok(theta),
                    other => Err(unexpected("invert.result", &other)),
                }
            }
            TrainMode::EncRados => {
                let upper: Vec<Ciphertext> = (0..d)
                    .flat_map(|i| (i..d).map(move |j| (i, j)))
                    .map(|(i, j)| a[(i, j)].clone())
                    .chain(b.iter().cloned())
                    .collect();
                let plain = self
                    .holder
                    .decrypt_many_logged("invert.aggregate", ObservationKind::Aggregate, &upper)?;
                let codec = self.ctx.codec();
                let mut values = plain.iter().zip(&upper).map(|(m, c)| codec.decode::<f64>(m, c.scale()));
                let mut system: Matrix<f64> = Matrix::zeros(d, d);
                for i in 0..d {
                    for j in i..d {
                        let v = values.next().expect("counted");
                        system[(i, j)] = v;
                        system[(j, i)] = v;
                    }
                    system[(i, i)] += gamma[i];
                }
                let rhs: Vec<f64> = values.collect();
                let theta = system.solve(&rhs)?;
                let sk = self.holder.secret_key();
                Ok(theta
                    .iter()
                    .map(|t| Ok(sk.encrypt_scaled(&codec.encode_at(t, f)?, f, &mut self.coordinator_rng)?))
                    .collect::<Result<_, NetError>>()?)
            }
        }
    }

    /// Sends each peer `⟦θ_p⟧ = ⟦θ[f_p]⟧`.
    pub(super) fn distribute(&mut self, theta: &[Ciphertext]) -> Result<(), NetError> {
        for p in 0..self.peers.len() {
            let slice: Vec<Ciphertext> = theta
                .iter()
                .zip(&self.peers[p].presence)
                .filter(|(_, &f)| f)
                .map(|(c, _)| c.clone())
                .collect();
            let got = self.bus.send(
                PartyId::Coordinator,
                PartyId::Peer(p),
                "distribute.theta",
                &Payload::Ciphertexts(slice),
            )?;
            let Payload::Ciphertexts(slice) = got else {
                return Err(unexpected("distribute.theta", &got));
            };
            self.peers[p].theta = Some(slice);
        }
        self.theta = Some(theta.to_vec());
        Ok(())
    }

    /// The coordinator keeps one training rado, chosen uniformly, encrypted.
    fn keep_extra_rado(&mut self) -> Result<(), NetError> {
        let counts: Vec<usize> = self.peers.iter().map(|p| p.rados.len()).collect();
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Ok(());
        }
        let mut pick = self.coordinator_rng.gen_range(0..total);
        let mut peer = 0;
        while pick >= counts[peer] {
            pick -= counts[peer];
            peer += 1;
        }
        let reference = Payload::RadoRef {
            peer: peer as u32,
            index: pick as u32,
        };
        self.bus.send(
            PartyId::Coordinator,
            PartyId::Intermediary(peer),
            "distribute.rado_request",
            &reference,
        )?;
        let rado = self.peers[peer].rados[pick].clone();
        let got = self.bus.send(
            PartyId::Intermediary(peer),
            PartyId::Coordinator,
            "distribute.rado",
            &Payload::Ciphertexts(rado),
        )?;
        let Payload::Ciphertexts(rado) = got else {
            return Err(unexpected("distribute.rado", &got));
        };
        self.extra_rado = Some(rado);
        self.report.extra_rado = Some((peer, pick));
        Ok(())
    }

    /// A session whose classifier is set directly instead of trained; used
    /// to exercise classification on a known `θ`.
    pub fn with_plain_theta<T: Scalar>(
        cfg: &TrainConfig,
        presence: Vec<Vec<bool>>,
        theta: &[T],
    ) -> Result<Self, NetError> {
        let mut s = Session::start(cfg, presence.len())?;
        let d = theta.len();
        if presence.iter().any(|f| f.len() != d) {
            return Err(NetError::Config(
                "presence vectors must match the dimension of θ".into(),
            ));
        }
        s.feature_dim = d - cfg.intercept as usize;
        s.phase_step(Phase::Featurize, |s| {
            for (state, f) in s.peers.iter_mut().zip(presence) {
                state.presence = f;
            }
            Ok(())
        })?;
        s.phase_step(Phase::Distribute, |s| {
            let codec = s.ctx.codec().clone();
            let sk = s.holder.secret_key().clone();
            let f = codec.fraction_bits();
            let enc = theta
                .iter()
                .map(|t| Ok(sk.encrypt_scaled(&codec.encode_at(t, f)?, f, &mut s.coordinator_rng)?))
                .collect::<Result<Vec<_>, NetError>>()?;
            s.distribute(&enc)
        })?;
        s.phase_step(Phase::Done, |_| Ok(()))?;
        Ok(s)
    }
}

fn inputs_dim<T: Scalar>(inputs: &[PeerInput<T>]) -> usize {
    match &inputs[0] {
        PeerInput::Numeric(ds) => ds.d(),
        PeerInput::Text(_) => 0,
    }
}

pub(super) fn unexpected(step: &str, got: &Payload) -> NetError {
    NetError::UnexpectedPayload {
        step: step.to_string(),
        got: got.kind(),
    }
}

fn sum_vectors(ctx: &SecureContext, vs: &[Vec<Ciphertext>]) -> Result<Vec<Ciphertext>, NetError> {
    let first = vs.first().ok_or(SecError::RingBreak("no rados".into()))?;
    let pk = ctx.pk();
    (0..first.len())
        .map(|j| Ok(pk.hom_sum(vs.iter().map(|v| &v[j]))?))
        .collect()
}

/// Trains a classifier across the peers' private inputs.
///
/// On success every peer holds `⟦θ_p⟧`, the coordinator holds `⟦θ⟧` and one
/// encrypted training rado, and the session carries the transcript and
/// audit log.
pub fn run_train<T: Scalar>(inputs: &[PeerInput<T>], cfg: &TrainConfig) -> Result<Session, NetError> {
    let mut s = Session::start(cfg, inputs.len()).map_err(|e| NetError::Aborted {
        phase: Phase::Keygen,
        source: Box::new(e),
    })?;
    let datasets = s.phase_step(Phase::Featurize, |s| s.featurize(inputs))?;
    s.report.dim = s.dim();
    s.report.total_rados = cfg.rados_per_peer * inputs.len();
    let partials = s.phase_step(Phase::Rado, |s| s.build_rados(&datasets))?;
    drop(datasets);
    let b = s.phase_step(Phase::Mean, |s| s.mean(&partials))?;
    let a = s.phase_step(Phase::Variance, |s| s.variance(&b))?;
    let theta = s.phase_step(Phase::Invert, |s| s.invert(&a, &b))?;
    s.phase_step(Phase::Distribute, |s| {
        s.distribute(&theta)?;
        s.keep_extra_rado()
    })?;
    s.phase_step(Phase::Done, |_| Ok(()))?;
    s.report.messages = s.bus.sent();
    Ok(s)
}

/// Plaintext twin of the encrypted training: same signatures, same
/// centring, same regularizer.
pub fn plain_reference<T: Scalar>(datasets: &[Dataset<T>], cfg: &TrainConfig) -> Result<Vec<T>, NetError> {
    use crate::learners::{derisked_theta, peer_stats, rado_center};
    use crate::rado::make_rado;
    let prepared: Vec<Dataset<T>> = datasets
        .iter()
        .map(|ds| if cfg.intercept { ds.with_intercept() } else { ds.clone() })
        .collect();
    let mut per_peer = Vec::with_capacity(prepared.len());
    for (p, ds) in prepared.iter().enumerate() {
        let sigs = peer_signatures(cfg.seed, p, ds.m(), cfg.rados_per_peer)?;
        per_peer.push(sigs.iter().map(|s| make_rado(ds, s)).collect::<Result<Vec<_>, _>>()?);
    }
    let all: Vec<_> = per_peer.iter().flatten().cloned().collect();
    let b = rado_center(&all, cfg.center)?;
    let stats = per_peer
        .iter()
        .map(|r| peer_stats(r, &b))
        .collect::<Result<Vec<_>, _>>()?;
    let presence: Vec<Vec<bool>> = prepared.iter().map(Dataset::feature_presence).collect();
    let gamma = Regularizer::from_presence(cfg.epsilon, &presence)?.matrix::<T>();
    Ok(derisked_theta(&stats, &gamma, cfg.center)?.theta)
}
