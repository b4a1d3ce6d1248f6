//! Wire shapes returned by the API.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use emcoord_core::comms::{ChatMessage, ChatMode, Delivery, DeliveryReceipt, PayloadKind};
use emcoord_core::ledger::{
    AccessPolicy, ContractEvent, EventContract, EventKind, EventState, Receipt, Worker,
};

/// An event contract with coordinates as decimal degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventView {
    pub event_id: String,
    pub entity: String,
    pub generator: String,
    pub privacy_policy: AccessPolicy,
    pub lat: f64,
    pub lon: f64,
    pub kind: EventKind,
    pub risk_level: u8,
    pub state: EventState,
    /// Empty when the caller may not read the participant list.
    pub participants: Vec<Worker>,
    pub num_participants: usize,
    pub redacted: bool,
}

impl EventView {
    pub fn render(c: &EventContract, readable: bool) -> Self {
        EventView {
            event_id: c.event_id.clone(),
            entity: c.entity.clone(),
            generator: c.generator.clone(),
            privacy_policy: c.privacy_policy,
            lat: c.location.lat.degrees(),
            lon: c.location.lon.degrees(),
            kind: c.kind,
            risk_level: c.risk_level,
            state: c.state,
            participants: if readable { c.participants.clone() } else { Vec::new() },
            num_participants: c.num_participants,
            redacted: !readable,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiptView {
    pub event: EventView,
    pub block_index: Option<u64>,
    pub block_hash: Option<String>,
    pub emitted: Option<ContractEvent>,
}

impl From<Receipt> for ReceiptView {
    fn from(r: Receipt) -> Self {
        ReceiptView {
            event: EventView::render(&r.contract, true),
            block_index: r.block_index,
            block_hash: r.block_hash,
            emitted: r.event,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryView {
    pub delivered: usize,
    pub undeliverable: usize,
    pub targets: Vec<TargetView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetView {
    pub identity: String,
    pub delivered: bool,
    pub channel: Option<String>,
    pub delay_secs: Option<f64>,
    pub reason: Option<String>,
}

impl From<DeliveryReceipt> for DeliveryView {
    fn from(r: DeliveryReceipt) -> Self {
        let targets = r
            .targets
            .iter()
            .map(|(id, d)| match d {
                Delivery::Delivered {
                    channel,
                    delay_secs,
                } => TargetView {
                    identity: id.clone(),
                    delivered: true,
                    channel: Some(format!("{channel:?}")),
                    delay_secs: Some(*delay_secs),
                    reason: None,
                },
                Delivery::Undeliverable { reason } => TargetView {
                    identity: id.clone(),
                    delivered: false,
                    channel: None,
                    delay_secs: None,
                    reason: Some(format!("{reason:?}")),
                },
            })
            .collect();
        DeliveryView {
            delivered: r.delivered(),
            undeliverable: r.undeliverable(),
            targets,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboxItem {
    pub seq: u64,
    pub event_id: String,
    pub sender_id: String,
    /// `p2p` or `broadcast`.
    pub mode: String,
    pub kind: PayloadKind,
    /// Base64.
    pub body: String,
}

impl InboxItem {
    pub fn new(seq: u64, m: ChatMessage) -> Self {
        InboxItem {
            seq,
            event_id: m.event_id,
            sender_id: m.sender_id,
            mode: match m.mode {
                ChatMode::P2P => "p2p",
                ChatMode::Broadcast => "broadcast",
            }
            .into(),
            kind: m.kind,
            body: B64.encode(&m.body),
        }
    }
}
