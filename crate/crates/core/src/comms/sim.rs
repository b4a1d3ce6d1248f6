use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use super::channel::Channel;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum LinkError {
    #[error("peer unknown to the medium")]
    UnknownPeer,
    #[error("radio switched off at one end")]
    RadioOff,
    #[error("peer out of range")]
    OutOfRange,
}

/// Where frames go. Implementations decide reachability.
pub trait Transport {
    fn now(&self) -> u64;

    /// Queues `frame` at `to`; returns the transfer delay in seconds.
    fn transmit(&mut self, from: &str, to: &str, channel: Channel, frame: &[u8])
        -> Result<f64, LinkError>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radio {
    pub x: f64,
    pub y: f64,
    pub wifi: bool,
    pub ble: bool,
}

/// In-memory medium with planar positions, per-node inboxes and a capture
/// of everything that crossed the air.
#[derive(Debug, Default)]
pub struct SimMedium {
    pub clock: u64,
    nodes: BTreeMap<String, Radio>,
    inboxes: BTreeMap<String, VecDeque<Vec<u8>>>,
    captured: Vec<(String, String, Vec<u8>)>,
}

impl SimMedium {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, id: &str, x: f64, y: f64, wifi: bool, ble: bool) {
        self.nodes.insert(id.to_string(), Radio { x, y, wifi, ble });
        self.inboxes.entry(id.to_string()).or_default();
    }

    pub fn radio(&self, id: &str) -> Option<&Radio> {
        self.nodes.get(id)
    }

    pub fn distance(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = (self.nodes.get(a)?, self.nodes.get(b)?);
        Some((a.x - b.x).hypot(a.y - b.y))
    }

    pub fn drain(&mut self, id: &str) -> Vec<Vec<u8>> {
        self.inboxes
            .get_mut(id)
            .map(|q| q.drain(..).collect())
            .unwrap_or_default()
    }

    /// `(from, to, frame)` for every successful transmission.
    pub fn captured(&self) -> &[(String, String, Vec<u8>)] {
        &self.captured
    }
}

impl Transport for SimMedium {
    fn now(&self) -> u64 {
        self.clock
    }

    fn transmit(
        &mut self,
        from: &str,
        to: &str,
        channel: Channel,
        frame: &[u8],
    ) -> Result<f64, LinkError> {
        let (a, b) = match (self.nodes.get(from), self.nodes.get(to)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(LinkError::UnknownPeer),
        };
        let up = |r: &Radio| match channel {
            Channel::WifiDirect => r.wifi,
            Channel::Ble => r.ble,
        };
        if !up(a) || !up(b) {
            return Err(LinkError::RadioOff);
        }
        if (a.x - b.x).hypot(a.y - b.y) > channel.range_m() {
            return Err(LinkError::OutOfRange);
        }
        self.inboxes
            .entry(to.to_string())
            .or_default()
            .push_back(frame.to_vec());
        self.captured
            .push((from.to_string(), to.to_string(), frame.to_vec()));
        Ok(channel.transfer_secs(frame.len()))
    }
}
