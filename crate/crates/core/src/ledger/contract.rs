use std::fmt;

use serde::{Deserialize, Serialize};

use super::geo::Location;
use crate::ibsc::{EventContext, IbscError, MicroDegrees};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Fire,
    Climate,
    Seismic,
    Volcanic,
    Flooding,
    Pollution,
    Other,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::Fire,
        EventKind::Climate,
        EventKind::Seismic,
        EventKind::Volcanic,
        EventKind::Flooding,
        EventKind::Pollution,
        EventKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Fire => "fire",
            EventKind::Climate => "climate",
            EventKind::Seismic => "seismic",
            EventKind::Volcanic => "volcanic",
            EventKind::Flooding => "flooding",
            EventKind::Pollution => "pollution",
            EventKind::Other => "other",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventState {
    Created,
    Verified,
    Inactive,
}

impl EventState {
    /// Same-state updates are allowed (risk-only changes); Inactive is terminal.
    pub fn can_become(self, next: EventState) -> bool {
        use EventState::*;
        matches!(
            (self, next),
            (Created, Created)
                | (Verified, Verified)
                | (Created, Verified)
                | (Created, Inactive)
                | (Verified, Inactive)
        )
    }
}

impl fmt::Display for EventState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Named rule deciding who may read an event's ids and shared data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessPolicy {
    /// Participants, plus any staff of the owning entity or of an entity
    /// with at least one participant.
    #[default]
    ParticipantsAndEntities,
    /// Listed participants only.
    ParticipantsOnly,
}

impl AccessPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessPolicy::ParticipantsAndEntities => "participants-and-entities",
            AccessPolicy::ParticipantsOnly => "participants-only",
        }
    }
}

impl std::str::FromStr for AccessPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "participants-and-entities" => Ok(AccessPolicy::ParticipantsAndEntities),
            "participants-only" => Ok(AccessPolicy::ParticipantsOnly),
            _ => Err(format!("unknown access policy {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Worker {
    pub entity: String,
    pub user: String,
    /// Public IBSC identifier of the staff member.
    pub identity: String,
    pub event_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventContract {
    pub event_id: String,
    pub entity: String,
    pub generator: String,
    pub privacy_policy: AccessPolicy,
    pub location: Location,
    pub kind: EventKind,
    pub risk_level: u8,
    pub state: EventState,
    pub participants: Vec<Worker>,
    pub num_participants: usize,
}

impl EventContract {
    pub fn has_participant(&self, user: &str) -> bool {
        self.participants.iter().any(|w| w.user == user)
    }

    /// The owning entity plus every entity with a participant.
    pub fn involves_entity(&self, entity: &str) -> bool {
        self.entity == entity || self.participants.iter().any(|w| w.entity == entity)
    }
}

/// Everything a device needs to derive any participant's event public key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreSharedData {
    pub event_id: String,
    pub lat: MicroDegrees,
    pub lon: MicroDegrees,
    /// Fingerprint of the system parameters the event keys live under.
    pub params_ref: String,
}

impl PreSharedData {
    pub fn context(&self) -> Result<EventContext, IbscError> {
        EventContext::new(self.event_id.clone(), self.lat, self.lon)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TxOp {
    Create,
    Confirm,
    Abort,
    UpdateParticipants,
    UpdateState,
    UpdateAccess,
    Kill,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "body", deny_unknown_fields)]
pub enum TxBody {
    Create {
        event_id: String,
        entity: String,
        location: Location,
        kind: EventKind,
        risk_level: u8,
        privacy_policy: AccessPolicy,
    },
    Confirm {
        event_id: String,
        ratifier_location: Location,
    },
    Abort {
        event_id: String,
    },
    UpdateParticipants {
        event_id: String,
        workers: Vec<Worker>,
    },
    UpdateState {
        event_id: String,
        risk_level: u8,
        state: EventState,
    },
    UpdateAccess {
        event_id: String,
        privacy_policy: AccessPolicy,
    },
    Kill {
        event_id: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractTransaction {
    /// Staff id of the submitter.
    pub actor: String,
    pub tx: TxBody,
}

impl ContractTransaction {
    pub fn new(actor: impl Into<String>, tx: TxBody) -> Self {
        ContractTransaction {
            actor: actor.into(),
            tx,
        }
    }

    pub fn op(&self) -> TxOp {
        match self.tx {
            TxBody::Create { .. } => TxOp::Create,
            TxBody::Confirm { .. } => TxOp::Confirm,
            TxBody::Abort { .. } => TxOp::Abort,
            TxBody::UpdateParticipants { .. } => TxOp::UpdateParticipants,
            TxBody::UpdateState { .. } => TxOp::UpdateState,
            TxBody::UpdateAccess { .. } => TxOp::UpdateAccess,
            TxBody::Kill { .. } => TxOp::Kill,
        }
    }

    pub fn event_id(&self) -> &str {
        match &self.tx {
            TxBody::Create { event_id, .. }
            | TxBody::Confirm { event_id, .. }
            | TxBody::Abort { event_id }
            | TxBody::UpdateParticipants { event_id, .. }
            | TxBody::UpdateState { event_id, .. }
            | TxBody::UpdateAccess { event_id, .. }
            | TxBody::Kill { event_id } => event_id,
        }
    }
}
