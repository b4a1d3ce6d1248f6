use std::collections::BTreeMap;

use serde::Serialize;

use super::beacon::{event_fingerprint, BeaconFrame, FINGERPRINT_LEN};

/// How often unverified entries are re-checked against the contract.
pub const DEFAULT_REFRESH_SECS: u64 = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Neighbor {
    pub last_seen: u64,
    /// True only while the identity is on the contract's id list.
    pub verified: bool,
    pub distance_m: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ingest {
    Verified,
    Unverified,
    /// Beacon advertises another event; ignored.
    ForeignEvent,
}

/// Nearby staff of one event, learned from beacons.
#[derive(Clone, Debug)]
pub struct NeighborTable {
    fingerprint: [u8; FINGERPRINT_LEN],
    own_identity: String,
    entries: BTreeMap<String, Neighbor>,
    refresh_secs: u64,
    last_refresh: Option<u64>,
}

impl NeighborTable {
    pub fn new(event_id: &str, own_identity: &str) -> Self {
        NeighborTable {
            fingerprint: event_fingerprint(event_id),
            own_identity: own_identity.to_string(),
            entries: BTreeMap::new(),
            refresh_secs: DEFAULT_REFRESH_SECS,
            last_refresh: None,
        }
    }

    pub fn with_refresh_secs(mut self, secs: u64) -> Self {
        self.refresh_secs = secs;
        self
    }

    pub fn ingest(
        &mut self,
        frame: &BeaconFrame,
        contract_ids: &[String],
        now: u64,
        distance_m: Option<f64>,
    ) -> Ingest {
        if frame.fingerprint != self.fingerprint || frame.identity == self.own_identity {
            return Ingest::ForeignEvent;
        }
        let verified = contract_ids.contains(&frame.identity);
        let entry = self
            .entries
            .entry(frame.identity.clone())
            .or_insert(Neighbor {
                last_seen: now,
                verified,
                distance_m,
            });
        entry.last_seen = entry.last_seen.max(now);
        entry.verified = verified;
        entry.distance_m = distance_m;
        if verified {
            Ingest::Verified
        } else {
            Ingest::Unverified
        }
    }

    /// Re-checks every entry against a fresh id list.
    pub fn refresh(&mut self, contract_ids: &[String], now: u64) {
        for (id, n) in self.entries.iter_mut() {
            n.verified = contract_ids.contains(id);
        }
        self.last_refresh = Some(now);
    }

    pub fn needs_refresh(&self, now: u64) -> bool {
        self.entries.values().any(|n| !n.verified)
            && self
                .last_refresh
                .is_none_or(|t| now.saturating_sub(t) >= self.refresh_secs)
    }

    pub fn get(&self, identity: &str) -> Option<&Neighbor> {
        self.entries.get(identity)
    }

    pub fn entries(&self) -> &BTreeMap<String, Neighbor> {
        &self.entries
    }

    pub fn verified(&self) -> impl Iterator<Item = (&str, &Neighbor)> {
        self.entries
            .iter()
            .filter(|(_, n)| n.verified)
            .map(|(id, n)| (id.as_str(), n))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
