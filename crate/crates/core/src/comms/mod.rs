//! Device-to-device chat plane for one event.
//!
//! Staff devices advertise their identity in BLE-sized beacons, keep a
//! [`NeighborTable`] of nearby ids checked against the contract, and send
//! signcrypted chat over whichever simulated radio reaches the peer.
//!
//! The payload kind travels twice: in the clear in the transport header, for
//! routing, and as the first plaintext byte under the signcryption. A
//! receiver only surfaces a message when both agree.

pub mod beacon;
pub mod channel;
pub mod frame;
pub mod neighbors;
pub mod sim;

use rand::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::bilinear::BilinearEngine;
use crate::ibsc::{
    open_envelope, signcrypt_broadcast, signcrypt_p2p, Envelope, EventKeys, IbscError, Mode,
    OpenError, SystemParams, MAX_MESSAGE_LEN,
};

pub use beacon::{beacon_decode, beacon_encode, event_fingerprint, BeaconError, BeaconFrame};
pub use channel::{select_channel, Channel, ChannelDecision, ChannelMode, ChannelReason};
pub use frame::{FrameError, PayloadKind, TransportFrame};
pub use neighbors::{Ingest, Neighbor, NeighborTable};
pub use sim::{LinkError, SimMedium, Transport};

/// Largest chat body; one byte of the envelope cap carries the payload kind.
pub const MAX_BODY_LEN: usize = MAX_MESSAGE_LEN - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommsError {
    #[error("emergency mode is off")]
    EmergencyModeOff,
    #[error("no verified peers in range")]
    NoVerifiedPeers,
    #[error("{0} is not a verified neighbor")]
    PeerUnverified(String),
    #[error("no radio reaches {0}")]
    ChannelUnavailable(String),
    #[error("chat body of {0} bytes exceeds the cap")]
    Oversize(usize),
    #[error(transparent)]
    Crypto(#[from] IbscError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChatMessage {
    pub sender_id: String,
    pub event_id: String,
    pub mode: ChatMode,
    pub kind: PayloadKind,
    pub body: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ChatMode {
    P2P,
    Broadcast,
}

impl From<Mode> for ChatMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::P2P => ChatMode::P2P,
            Mode::Broadcast => ChatMode::Broadcast,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Delivery {
    Delivered { channel: Channel, delay_secs: f64 },
    Undeliverable { reason: ChannelReason },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeliveryReceipt {
    pub targets: Vec<(String, Delivery)>,
}

impl DeliveryReceipt {
    pub fn delivered(&self) -> usize {
        self.targets
            .iter()
            .filter(|(_, d)| matches!(d, Delivery::Delivered { .. }))
            .count()
    }

    pub fn undeliverable(&self) -> usize {
        self.targets.len() - self.delivered()
    }
}

/// Why an incoming frame produced no message.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReceiveError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("frame rejected")]
    Reject,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReceiveStats {
    pub accepted: u64,
    pub rejected: u64,
    pub malformed: u64,
}

/// One device taking part in one event.
pub struct NodeContext<E: BilinearEngine> {
    params: SystemParams<E>,
    keys: EventKeys<E>,
    identity: String,
    pub neighbors: NeighborTable,
    pub wifi: bool,
    pub ble: bool,
    /// Operator switch; D2D chat is only used while it is on.
    pub emergency_mode: bool,
    stats: ReceiveStats,
}

impl<E: BilinearEngine> NodeContext<E> {
    pub fn new(params: SystemParams<E>, keys: EventKeys<E>) -> Self {
        let identity = String::from_utf8_lossy(&keys.id).into_owned();
        let neighbors = NeighborTable::new(&keys.ctx.event_id, &identity);
        NodeContext {
            params,
            keys,
            identity,
            neighbors,
            wifi: true,
            ble: true,
            emergency_mode: true,
            stats: ReceiveStats::default(),
        }
    }

    pub fn identity(&self) -> &str {
        &self.identity
    }

    pub fn event_id(&self) -> &str {
        &self.keys.ctx.event_id
    }

    pub fn stats(&self) -> ReceiveStats {
        self.stats
    }

    pub fn beacon(&self) -> Result<Vec<u8>, BeaconError> {
        beacon_encode(&self.identity, self.event_id())
    }

    pub fn ingest_beacon(
        &mut self,
        bytes: &[u8],
        contract_ids: &[String],
        now: u64,
        distance_m: Option<f64>,
    ) -> Result<Ingest, BeaconError> {
        let frame = beacon_decode(bytes)?;
        Ok(self.neighbors.ingest(&frame, contract_ids, now, distance_m))
    }

    fn plaintext(kind: PayloadKind, body: &[u8]) -> Result<Vec<u8>, CommsError> {
        if body.len() > MAX_BODY_LEN {
            return Err(CommsError::Oversize(body.len()));
        }
        let mut m = Vec::with_capacity(body.len() + 1);
        m.push(kind.to_byte());
        m.extend_from_slice(body);
        Ok(m)
    }

    /// Tries the selected radio, then BLE when Wi-Fi was only a guess or failed.
    fn deliver<T: Transport>(
        &self,
        transport: &mut T,
        peer: &str,
        distance_m: Option<f64>,
        kind: PayloadKind,
        envelope: &[u8],
    ) -> Delivery {
        let decision = select_channel(distance_m, self.wifi, self.ble);
        let mut attempts = Vec::new();
        if let Some(ch) = decision.channel() {
            attempts.push(ch);
        }
        let ble_may_reach = distance_m.is_none_or(|d| d <= channel::BLE_RANGE_M);
        if decision.mode == ChannelMode::WifiDirect && self.ble && ble_may_reach {
            attempts.push(Channel::Ble);
        }
        for channel in attempts {
            let frame = TransportFrame {
                channel,
                timestamp: transport.now(),
                kind,
                envelope: envelope.to_vec(),
            };
            if let Ok(delay_secs) = transport.transmit(&self.identity, peer, channel, &frame.encode())
            {
                return Delivery::Delivered {
                    channel,
                    delay_secs,
                };
            }
        }
        let reason = match decision.mode {
            ChannelMode::None => decision.reason,
            _ => ChannelReason::OutOfRange,
        };
        Delivery::Undeliverable { reason }
    }

    pub fn send_p2p<T: Transport, R: RngCore + ?Sized>(
        &self,
        transport: &mut T,
        peer_id: &str,
        kind: PayloadKind,
        body: &[u8],
        rng: &mut R,
    ) -> Result<DeliveryReceipt, CommsError> {
        if !self.emergency_mode {
            return Err(CommsError::EmergencyModeOff);
        }
        let peer = self
            .neighbors
            .get(peer_id)
            .filter(|n| n.verified)
            .ok_or_else(|| CommsError::PeerUnverified(peer_id.into()))?;
        let distance = peer.distance_m;
        if select_channel(distance, self.wifi, self.ble).mode == ChannelMode::None {
            return Err(CommsError::ChannelUnavailable(peer_id.into()));
        }
        let m = Self::plaintext(kind, body)?;
        let env = signcrypt_p2p(&self.params, &self.keys, peer_id.as_bytes(), &m, rng)?;
        let bytes = Envelope::P2P(env).encode(&self.params.engine);
        let outcome = self.deliver(transport, peer_id, distance, kind, &bytes);
        Ok(DeliveryReceipt {
            targets: vec![(peer_id.to_string(), outcome)],
        })
    }

    /// One envelope for every verified neighbor, transmitted to each.
    pub fn send_broadcast<T: Transport, R: RngCore + ?Sized>(
        &self,
        transport: &mut T,
        kind: PayloadKind,
        body: &[u8],
        rng: &mut R,
    ) -> Result<DeliveryReceipt, CommsError> {
        if !self.emergency_mode {
            return Err(CommsError::EmergencyModeOff);
        }
        let targets: Vec<(&str, Option<f64>)> = self
            .neighbors
            .verified()
            .map(|(id, n)| (id, n.distance_m))
            .collect();
        if targets.is_empty() {
            return Err(CommsError::NoVerifiedPeers);
        }
        let m = Self::plaintext(kind, body)?;
        let ids: Vec<&[u8]> = targets.iter().map(|(id, _)| id.as_bytes()).collect();
        let env = signcrypt_broadcast(&self.params, &self.keys, &ids, &m, rng)?;
        let bytes = Envelope::Broadcast(env).encode(&self.params.engine);
        let targets = targets
            .into_iter()
            .map(|(id, d)| (id.to_string(), self.deliver(transport, id, d, kind, &bytes)))
            .collect();
        Ok(DeliveryReceipt { targets })
    }

    /// Decodes and authenticates one frame. Failures are counted; malformed
    /// input and failed verification are reported separately.
    pub fn receive(&mut self, bytes: &[u8]) -> Result<ChatMessage, ReceiveError> {
        let result = self.open(bytes);
        match &result {
            Ok(_) => self.stats.accepted += 1,
            Err(ReceiveError::Reject) => self.stats.rejected += 1,
            Err(ReceiveError::Malformed(_)) => self.stats.malformed += 1,
        }
        result
    }

    fn open(&self, bytes: &[u8]) -> Result<ChatMessage, ReceiveError> {
        let frame =
            TransportFrame::decode(bytes).map_err(|e| ReceiveError::Malformed(e.to_string()))?;
        let opened = open_envelope(&self.params, &self.keys, &frame.envelope).map_err(|e| match e {
            OpenError::Malformed(w) => ReceiveError::Malformed(w.to_string()),
            OpenError::Reject(_) => ReceiveError::Reject,
        })?;
        let (&inner, body) = opened.plaintext.split_first().ok_or(ReceiveError::Reject)?;
        if inner != frame.kind.to_byte() {
            return Err(ReceiveError::Reject);
        }
        let sender_id = String::from_utf8(opened.sender_id).map_err(|_| ReceiveError::Reject)?;
        Ok(ChatMessage {
            sender_id,
            event_id: self.keys.ctx.event_id.clone(),
            mode: opened.mode.into(),
            kind: frame.kind,
            body: body.to_vec(),
        })
    }
}
