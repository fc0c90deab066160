//! Per-party record of every plaintext a party decrypted or received, with
//! the assertions the honest-but-curious model relies on.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::Serialize;

use crate::secmath::{Observation, ObservationKind, PartyId};

/// Steps whose decryptions are masked two-party traffic.
pub const MASKED_STEPS: [&str; 3] = ["elemprod.mask", "matprod.mask", "rescale.mask"];

/// Steps at which the coordinator may decrypt an aggregate over all peers.
pub const AGGREGATE_STEPS: [&str; 2] = ["inv.norm", "invert.aggregate"];

/// Steps at which the coordinator decrypts the protocol's output.
pub const OUTPUT_STEPS: [&str; 1] = ["classify.alpha"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditEvent {
    pub party: PartyId,
    pub protocol: String,
    pub step: String,
    pub kind: ObservationKind,
    pub count: usize,
    /// Whether the party obtained the values by decryption rather than
    /// receiving them in the clear.
    pub decrypted: bool,
    #[serde(skip)]
    pub values: Vec<BigUint>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PartySummary {
    pub decrypt_events: usize,
    pub decrypted_values: usize,
    pub cleartext_events: usize,
    pub steps: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("audit violation at {party} step {step}: {reason}")]
pub struct AuditViolation {
    pub party: PartyId,
    pub step: String,
    pub reason: String,
}

/// Append-only.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditLog {
    events: Vec<AuditEvent>,
}

impl AuditLog {
    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    pub fn for_party(&self, party: PartyId) -> impl Iterator<Item = &AuditEvent> {
        self.events.iter().filter(move |e| e.party == party)
    }

    pub(crate) fn record_cleartext(
        &mut self,
        party: PartyId,
        protocol: &str,
        step: &str,
        kind: ObservationKind,
        count: usize,
    ) {
        self.events.push(AuditEvent {
            party,
            protocol: protocol.to_string(),
            step: step.to_string(),
            kind,
            count,
            decrypted: false,
            values: Vec::new(),
        });
    }

    pub(crate) fn record_decryptions(&mut self, party: PartyId, protocol: &str, observations: Vec<Observation>) {
        for o in observations {
            self.events.push(AuditEvent {
                party,
                protocol: protocol.to_string(),
                step: o.step,
                kind: o.kind,
                count: o.count,
                decrypted: true,
                values: o.values,
            });
        }
    }

    pub fn summary(&self) -> BTreeMap<String, PartySummary> {
        let mut out: BTreeMap<String, PartySummary> = BTreeMap::new();
        for e in &self.events {
            let s = out.entry(e.party.to_string()).or_default();
            if e.decrypted {
                s.decrypt_events += 1;
                s.decrypted_values += e.count;
            } else {
                s.cleartext_events += 1;
            }
            *s.steps.entry(e.step.clone()).or_default() += 1;
        }
        out
    }

    /// Values the coordinator decrypted outside masked two-party traffic.
    pub fn coordinator_unmasked_values(&self) -> Vec<&BigUint> {
        self.for_party(PartyId::Coordinator)
            .filter(|e| e.decrypted && e.kind != ObservationKind::Masked)
            .flat_map(|e| e.values.iter())
            .collect()
    }

    /// Checks that
    /// - only the coordinator ever decrypts,
    /// - intermediaries never hold a plaintext,
    /// - every coordinator decryption is masked two-party traffic, an
    ///   aggregate over all peers, or the final classification score.
    pub fn check(&self) -> Result<(), AuditViolation> {
        for e in &self.events {
            let fail = |reason: &str| AuditViolation {
                party: e.party,
                step: e.step.clone(),
                reason: reason.to_string(),
            };
            match e.party {
                PartyId::Coordinator => {
                    if !e.decrypted {
                        continue;
                    }
                    let allowed = match e.kind {
                        ObservationKind::Masked => MASKED_STEPS.contains(&e.step.as_str()),
                        ObservationKind::Aggregate => AGGREGATE_STEPS.contains(&e.step.as_str()),
                        ObservationKind::FinalOutput => OUTPUT_STEPS.contains(&e.step.as_str()),
                        ObservationKind::PublicMetadata => false,
                    };
                    if !allowed {
                        return Err(fail("decryption of an unmasked, unaggregated value"));
                    }
                }
                PartyId::Intermediary(_) | PartyId::Worker => {
                    return Err(fail("ciphertext-only party observed a plaintext"));
                }
                PartyId::Peer(_) => {
                    if e.decrypted {
                        return Err(fail("peer decrypted a value"));
                    }
                    if !matches!(e.kind, ObservationKind::PublicMetadata | ObservationKind::FinalOutput) {
                        return Err(fail("peer received private plaintext"));
                    }
                }
            }
        }
        Ok(())
    }
}
