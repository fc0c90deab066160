use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::payload::Payload;
use super::{NetError, Phase};
use crate::secmath::{HolderReply, HolderRequest, KeyHolder, KeyHolderLink, PartyId, SecError};

/// Default cap on the number of messages one session may send.
pub const MESSAGE_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub sender: PartyId,
    pub receiver: PartyId,
    /// `"train"` or `"classify"`.
    pub protocol: String,
    pub phase: Phase,
    pub step: String,
    pub payload: Vec<u8>,
    /// Strictly increasing per `(sender, receiver)` pair, starting at 0.
    pub seq: u64,
}

/// Simulated transport. Every message is serialized, logged and handed back
/// as bytes for the receiver to decode.
#[derive(Debug)]
pub struct Bus {
    log: Vec<ProtocolMessage>,
    next_seq: BTreeMap<(PartyId, PartyId), u64>,
    budget: usize,
    protocol: String,
    phase: Phase,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new(MESSAGE_BUDGET)
    }
}

impl Bus {
    pub fn new(budget: usize) -> Self {
        Self {
            log: Vec::new(),
            next_seq: BTreeMap::new(),
            budget,
            protocol: "train".into(),
            phase: Phase::Keygen,
        }
    }

    pub fn protocol(&self) -> &str {
        &self.protocol
    }

    pub fn set_protocol(&mut self, protocol: &str) {
        self.protocol = protocol.to_string();
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Moves to `phase`; phases never go backwards within a protocol.
    pub fn advance(&mut self, phase: Phase) -> Result<(), NetError> {
        if phase < self.phase {
            return Err(NetError::PhaseOrder {
                from: self.phase,
                to: phase,
            });
        }
        self.phase = phase;
        Ok(())
    }

    pub fn sent(&self) -> usize {
        self.log.len()
    }

    pub fn send(&mut self, from: PartyId, to: PartyId, step: &str, payload: &Payload) -> Result<Payload, NetError> {
        if self.log.len() >= self.budget {
            return Err(NetError::Budget(self.budget));
        }
        let seq = self.next_seq.entry((from, to)).or_insert(0);
        let bytes = payload.to_bytes();
        self.log.push(ProtocolMessage {
            sender: from,
            receiver: to,
            protocol: self.protocol.clone(),
            phase: self.phase,
            step: step.to_string(),
            payload: bytes,
            seq: *seq,
        });
        *seq += 1;
        let delivered = &self.log.last().expect("just pushed").payload;
        Ok(Payload::from_bytes(delivered)?)
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            messages: self.log.clone(),
        }
    }

    pub fn messages(&self) -> &[ProtocolMessage] {
        &self.log
    }
}

/// Carries one party's two-party requests to the key holder over the bus.
pub struct BusLink<'a> {
    pub bus: &'a mut Bus,
    pub holder: &'a mut KeyHolder,
    pub client: PartyId,
    pub holder_id: PartyId,
}

impl KeyHolderLink for BusLink<'_> {
    fn exchange(&mut self, request: HolderRequest) -> Result<HolderReply, SecError> {
        let (ask, answer) = request.step_ids();
        let transport = |e: NetError| SecError::Transport(e.to_string());
        let delivered = self
            .bus
            .send(self.client, self.holder_id, ask, &Payload::Request(request))
            .map_err(transport)?;
        let Payload::Request(request) = delivered else {
            return Err(SecError::Protocol("expected a request".into()));
        };
        let reply = self.holder.handle(&request);
        match self
            .bus
            .send(self.holder_id, self.client, answer, &Payload::Reply(reply))
            .map_err(transport)?
        {
            Payload::Reply(reply) => Ok(reply),
            _ => Err(SecError::Protocol("expected a reply".into())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Line {
    seq: u64,
    sender: String,
    receiver: String,
    protocol: String,
    phase: Phase,
    step: String,
    payload: String,
}

/// Every message of a session, in send order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub messages: Vec<ProtocolMessage>,
}

/// What replaying a transcript found.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReplaySummary {
    pub messages: usize,
    pub payload_bytes: usize,
    pub ciphertexts: usize,
    pub per_step: BTreeMap<String, usize>,
    pub per_sender: BTreeMap<String, usize>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// One JSON object per line, payloads in base64.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let line = Line {
                seq: m.seq,
                sender: m.sender.to_string(),
                receiver: m.receiver.to_string(),
                protocol: m.protocol.clone(),
                phase: m.phase,
                step: m.step.clone(),
                payload: STANDARD.encode(&m.payload),
            };
            out.push_str(&serde_json::to_string(&line).expect("plain struct"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, NetError> {
        let mut messages = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| NetError::Transcript(format!("line {}: {msg}", i + 1));
            let line: Line = serde_json::from_str(raw).map_err(|e| bad(e.to_string()))?;
            messages.push(ProtocolMessage {
                sender: line.sender.parse().map_err(bad)?,
                receiver: line.receiver.parse().map_err(bad)?,
                protocol: line.protocol,
                phase: line.phase,
                step: line.step,
                payload: STANDARD.decode(line.payload).map_err(|e| bad(e.to_string()))?,
                seq: line.seq,
            });
        }
        Ok(Self { messages })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let mut f = fs::File::create(path).map_err(|e| NetError::Io(e.to_string()))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| NetError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Self::from_jsonl(&fs::read_to_string(path).map_err(|e| NetError::Io(e.to_string()))?)
    }

    /// Re-checks the ordering rules and decodes every payload.
    pub fn replay(&self) -> Result<ReplaySummary, NetError> {
        let mut next: BTreeMap<(PartyId, PartyId), u64> = BTreeMap::new();
        let mut phase: BTreeMap<&str, Phase> = BTreeMap::new();
        let mut summary = ReplaySummary::default();
        for (i, m) in self.messages.iter().enumerate() {
            let bad = |msg: String| NetError::Transcript(format!("message {i}: {msg}"));
            let expected = next.entry((m.sender, m.receiver)).or_insert(0);
            if m.seq != *expected {
                return Err(bad(format!(
                    "{} → {} has sequence {} where {} was due",
                    m.sender, m.receiver, m.seq, expected
                )));
            }
            *expected += 1;
            let current = phase.entry(m.protocol.as_str()).or_insert(m.phase);
            if m.phase < *current {
                return Err(bad(format!("phase {} after {}", m.phase, current)));
            }
            *current = m.phase;
            let payload = Payload::from_bytes(&m.payload).map_err(|e| bad(format!("{}: {e}", m.step)))?;
            summary.messages += 1;
            summary.payload_bytes += m.payload.len();
            summary.ciphertexts += payload.ciphertext_count();
            *summary.per_step.entry(m.step.clone()).or_default() += 1;
            *summary.per_sender.entry(m.sender.to_string()).or_default() += 1;
        }
        Ok(summary)
    }
}
