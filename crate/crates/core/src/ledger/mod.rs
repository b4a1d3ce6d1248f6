//! Permissioned event ledger.
//!
//! A [`Ledger`] owns one hash-linked [`Chain`] and the event contracts
//! derived from it. Every mutating call builds a [`ContractTransaction`],
//! checks it against the current contract state, collects votes from the
//! online validators and only then appends a block and applies the change.
//! A failed check or a missed quorum leaves both chain and state untouched.
//!
//! The staff registry, validator ids and radii are fixed in the genesis
//! block, so a chain file plus the validator keys is enough to rebuild the
//! whole state with [`Ledger::load`].

pub mod block;
pub mod contract;
pub mod geo;

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use block::{
    genesis_prev_hash, parse_jsonl, validate_blocks, validate_jsonl, Block, BlockPayload, Chain,
    GenesisRecord, Proposal, ValidatorSet, Validity, Vote, DIGEST_LEN,
};
pub use contract::{
    AccessPolicy, ContractTransaction, EventContract, EventKind, EventState, PreSharedData, TxBody,
    TxOp, Worker,
};
pub use geo::{haversine_m, Location};

pub const GENESIS_MARKER: &str = "genesis";
pub const MIN_RISK: u8 = 1;
pub const MAX_RISK: u8 = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("{0} is not authorized for this operation")]
    Unauthorized(String),
    #[error("access denied for {0}")]
    AccessDenied(String),
    #[error("unknown event {0}")]
    UnknownEvent(String),
    #[error("event id {0} already exists")]
    EventExists(String),
    #[error("a live {kind} event already exists nearby: {existing}")]
    DuplicateEvent { existing: String, kind: EventKind },
    #[error("ratifier is {distance_m:.0} m from the event, limit {limit_m} m")]
    TooFar { distance_m: f64, limit_m: u32 },
    #[error("the generator cannot ratify its own event")]
    SelfRatification,
    #[error("invalid transition {from} -> {to}")]
    InvalidTransition { from: EventState, to: EventState },
    #[error("operation needs state {expected}, event is {actual}")]
    WrongState {
        expected: EventState,
        actual: EventState,
    },
    #[error("risk level {0} outside 1..=5")]
    InvalidRiskLevel(u8),
    #[error("coordinates out of range")]
    InvalidLocation,
    #[error("invalid worker: {0}")]
    InvalidWorker(String),
    #[error("{0} is already a participant")]
    DuplicateParticipant(String),
    #[error("{votes} of {validators} validators voted, {required} required")]
    QuorumNotReached {
        votes: usize,
        required: usize,
        validators: usize,
    },
    #[error("validator {0} voted twice")]
    DuplicateVote(String),
    #[error("{0} is not a registered validator")]
    UnknownValidator(String),
    #[error("bad vote signature from {0}")]
    BadVote(String),
    #[error("proposal does not extend the current tip")]
    StaleProposal,
    #[error("chain is invalid at block {0}")]
    InvalidChain(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaffRecord {
    pub entity: String,
    /// Public IBSC identifier.
    pub identity: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerConfig {
    pub dedup_radius_m: u32,
    pub ratification_radius_m: u32,
    /// Fingerprint of the IBSC system parameters handed out as `params_ref`.
    pub params_ref: String,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            dedup_radius_m: 5_000,
            ratification_radius_m: 2_000,
            params_ref: String::new(),
        }
    }
}

/// Source of block timestamps.
pub trait Clock: Send {
    fn now(&mut self) -> u64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&mut self) -> u64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    }
}

/// Starts at `next` and advances by `step` on every reading.
#[derive(Clone, Copy, Debug)]
pub struct StepClock {
    pub next: u64,
    pub step: u64,
}

impl Clock for StepClock {
    fn now(&mut self) -> u64 {
        let t = self.next;
        self.next += self.step;
        t
    }
}

/// Replays a recorded list of timestamps, then repeats the last one.
#[derive(Clone, Debug)]
pub struct ScriptedClock {
    times: Vec<u64>,
    pos: usize,
}

impl ScriptedClock {
    pub fn new(times: Vec<u64>) -> Self {
        ScriptedClock { times, pos: 0 }
    }
}

impl Clock for ScriptedClock {
    fn now(&mut self) -> u64 {
        let t = self
            .times
            .get(self.pos)
            .or(self.times.last())
            .copied()
            .unwrap_or(0);
        self.pos += 1;
        t
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "event_id")]
pub enum ContractEvent {
    EventGeneration(String),
    EventConfirmed(String),
    EventAborted(String),
}

/// Result of a mutating call.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Receipt {
    pub contract: EventContract,
    /// `None` when the call was an idempotent no-op and appended nothing.
    pub block_index: Option<u64>,
    pub block_hash: Option<String>,
    pub event: Option<ContractEvent>,
}

pub struct Ledger {
    config: LedgerConfig,
    staff: BTreeMap<String, StaffRecord>,
    validators: ValidatorSet,
    online: BTreeSet<String>,
    chain: Chain,
    contracts: BTreeMap<String, EventContract>,
    events: Vec<(u64, ContractEvent)>,
    clock: Box<dyn Clock>,
    rng: Box<dyn RngCore + Send>,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger")
            .field("blocks", &self.chain.len())
            .field("contracts", &self.contracts.len())
            .field("validators", &self.validators.len())
            .finish_non_exhaustive()
    }
}

impl Ledger {
    /// Creates a chain with a voted genesis block. All validators start online.
    pub fn genesis(
        config: LedgerConfig,
        staff: BTreeMap<String, StaffRecord>,
        validators: ValidatorSet,
        clock: Box<dyn Clock>,
        rng: Box<dyn RngCore + Send>,
    ) -> Result<Self, LedgerError> {
        let online = validators.ids().map(str::to_string).collect();
        let mut ledger = Ledger {
            config,
            staff,
            validators,
            online,
            chain: Chain::new(),
            contracts: BTreeMap::new(),
            events: Vec::new(),
            clock,
            rng,
        };
        let payload = BlockPayload::Genesis(GenesisRecord {
            marker: GENESIS_MARKER.into(),
            validators: ledger.validators.ids().map(str::to_string).collect(),
            staff: ledger.staff.clone(),
            config: ledger.config.clone(),
        });
        ledger.append(payload)?;
        Ok(ledger)
    }

    /// Rebuilds a ledger from stored blocks, re-checking every transaction.
    pub fn load(
        blocks: Vec<Block>,
        validators: ValidatorSet,
        clock: Box<dyn Clock>,
        rng: Box<dyn RngCore + Send>,
    ) -> Result<Self, LedgerError> {
        if let Validity::Invalid(i) = validate_blocks(&blocks, &validators) {
            return Err(LedgerError::InvalidChain(i));
        }
        let Some(BlockPayload::Genesis(g)) = blocks.first().map(|b| &b.payload) else {
            return Err(LedgerError::InvalidChain(0));
        };
        let online = validators.ids().map(str::to_string).collect();
        let mut ledger = Ledger {
            config: g.config.clone(),
            staff: g.staff.clone(),
            validators,
            online,
            chain: Chain::new(),
            contracts: BTreeMap::new(),
            events: Vec::new(),
            clock,
            rng,
        };
        for block in &blocks[1..] {
            let BlockPayload::Transaction(tx) = &block.payload else {
                return Err(LedgerError::InvalidChain(block.index));
            };
            let effect = ledger
                .check(tx)
                .map_err(|_| LedgerError::InvalidChain(block.index))?;
            if effect.is_none() {
                // no-ops are never written, so one on disk is foreign
                return Err(LedgerError::InvalidChain(block.index));
            }
            ledger.apply(tx, block.index);
        }
        ledger.chain = Chain::from_blocks(blocks);
        Ok(ledger)
    }

    /// Re-executes a transaction log from a fresh genesis. With the same
    /// inputs the resulting chain is byte-identical to the original.
    pub fn replay(
        config: LedgerConfig,
        staff: BTreeMap<String, StaffRecord>,
        validators: ValidatorSet,
        genesis_timestamp: u64,
        log: &[(ContractTransaction, u64)],
        rng: Box<dyn RngCore + Send>,
    ) -> Result<Self, LedgerError> {
        let mut times = vec![genesis_timestamp];
        times.extend(log.iter().map(|(_, t)| *t));
        let clock = Box::new(ScriptedClock::new(times));
        let mut ledger = Ledger::genesis(config, staff, validators, clock, rng)?;
        for (tx, _) in log {
            ledger.submit(tx.clone())?;
        }
        Ok(ledger)
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn staff(&self) -> &BTreeMap<String, StaffRecord> {
        &self.staff
    }

    pub fn validators(&self) -> &ValidatorSet {
        &self.validators
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn contract(&self, event_id: &str) -> Option<&EventContract> {
        self.contracts.get(event_id)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &EventContract> {
        self.contracts.values()
    }

    /// Emitted contract events with the index of the block that caused them.
    pub fn events(&self) -> &[(u64, ContractEvent)] {
        &self.events
    }

    /// Every committed transaction with its block timestamp.
    pub fn transaction_log(&self) -> Vec<(ContractTransaction, u64)> {
        self.chain
            .blocks()
            .iter()
            .filter_map(|b| match &b.payload {
                BlockPayload::Transaction(tx) => Some((tx.clone(), b.timestamp)),
                BlockPayload::Genesis(_) => None,
            })
            .collect()
    }

    /// Restricts which validators vote on new blocks, to simulate outages.
    pub fn set_online<I, S>(&mut self, ids: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.online = ids
            .into_iter()
            .map(Into::into)
            .filter(|id| self.validators.contains(id))
            .collect();
    }

    pub fn validate(&self) -> Validity {
        self.chain.validate(&self.validators)
    }

    pub fn create_event(
        &mut self,
        generator: &str,
        entity: &str,
        location: Location,
        kind: EventKind,
        risk_level: u8,
        privacy_policy: AccessPolicy,
    ) -> Result<Receipt, LedgerError> {
        let mut raw = [0u8; 8];
        self.rng.fill_bytes(&mut raw);
        let tx = TxBody::Create {
            event_id: hex::encode(raw),
            entity: entity.into(),
            location,
            kind,
            risk_level,
            privacy_policy,
        };
        self.submit(ContractTransaction::new(generator, tx))
    }

    pub fn ratify(
        &mut self,
        event_id: &str,
        ratifier: &str,
        ratifier_location: Location,
    ) -> Result<Receipt, LedgerError> {
        let tx = TxBody::Confirm {
            event_id: event_id.into(),
            ratifier_location,
        };
        self.submit(ContractTransaction::new(ratifier, tx))
    }

    pub fn abort_event(&mut self, event_id: &str, actor: &str) -> Result<Receipt, LedgerError> {
        let tx = TxBody::Abort {
            event_id: event_id.into(),
        };
        self.submit(ContractTransaction::new(actor, tx))
    }

    /// Adds workers to the event.
    pub fn update_participants(
        &mut self,
        event_id: &str,
        workers: Vec<Worker>,
        actor: &str,
    ) -> Result<Receipt, LedgerError> {
        let tx = TxBody::UpdateParticipants {
            event_id: event_id.into(),
            workers,
        };
        self.submit(ContractTransaction::new(actor, tx))
    }

    /// Builds the worker record for a registered staff member.
    pub fn worker_for(&self, event_id: &str, user: &str) -> Result<Worker, LedgerError> {
        let rec = self
            .staff
            .get(user)
            .ok_or_else(|| LedgerError::InvalidWorker(format!("{user} is not registered")))?;
        Ok(Worker {
            entity: rec.entity.clone(),
            user: user.into(),
            identity: rec.identity.clone(),
            event_id: event_id.into(),
        })
    }

    pub fn update_state(
        &mut self,
        event_id: &str,
        risk_level: u8,
        state: EventState,
        actor: &str,
    ) -> Result<Receipt, LedgerError> {
        let tx = TxBody::UpdateState {
            event_id: event_id.into(),
            risk_level,
            state,
        };
        self.submit(ContractTransaction::new(actor, tx))
    }

    pub fn update_access(
        &mut self,
        event_id: &str,
        privacy_policy: AccessPolicy,
        actor: &str,
    ) -> Result<Receipt, LedgerError> {
        let tx = TxBody::UpdateAccess {
            event_id: event_id.into(),
            privacy_policy,
        };
        self.submit(ContractTransaction::new(actor, tx))
    }

    pub fn kill_event(&mut self, event_id: &str, actor: &str) -> Result<Receipt, LedgerError> {
        let tx = TxBody::Kill {
            event_id: event_id.into(),
        };
        self.submit(ContractTransaction::new(actor, tx))
    }

    pub fn get_ids(&self, event_id: &str, requester: &str) -> Result<Vec<String>, LedgerError> {
        let c = self.readable(event_id, requester)?;
        Ok(c.participants.iter().map(|w| w.identity.clone()).collect())
    }

    pub fn get_shared_data(
        &self,
        event_id: &str,
        requester: &str,
    ) -> Result<PreSharedData, LedgerError> {
        let c = self.readable(event_id, requester)?;
        Ok(PreSharedData {
            event_id: c.event_id.clone(),
            lat: c.location.lat,
            lon: c.location.lon,
            params_ref: self.config.params_ref.clone(),
        })
    }

    /// Whether `requester` passes the event's access rule.
    pub fn may_read(&self, contract: &EventContract, requester: &str) -> bool {
        if contract.has_participant(requester) {
            return true;
        }
        match contract.privacy_policy {
            AccessPolicy::ParticipantsOnly => false,
            AccessPolicy::ParticipantsAndEntities => self
                .staff
                .get(requester)
                .is_some_and(|r| contract.involves_entity(&r.entity)),
        }
    }

    fn readable(&self, event_id: &str, requester: &str) -> Result<&EventContract, LedgerError> {
        let c = self
            .contracts
            .get(event_id)
            .ok_or_else(|| LedgerError::UnknownEvent(event_id.into()))?;
        if !self.may_read(c, requester) {
            return Err(LedgerError::AccessDenied(requester.into()));
        }
        Ok(c)
    }

    /// Checks, votes, appends and applies one transaction.
    pub fn submit(&mut self, tx: ContractTransaction) -> Result<Receipt, LedgerError> {
        let event_id = tx.event_id().to_string();
        if self.check(&tx)?.is_none() {
            return Ok(Receipt {
                contract: self.contracts[&event_id].clone(),
                block_index: None,
                block_hash: None,
                event: None,
            });
        }
        let block = self.append(BlockPayload::Transaction(tx.clone()))?;
        let (index, hash) = (block.index, block.hash_hex());
        let event = self.apply(&tx, index);
        Ok(Receipt {
            contract: self.contracts[&event_id].clone(),
            block_index: Some(index),
            block_hash: Some(hash),
            event,
        })
    }

    fn append(&mut self, payload: BlockPayload) -> Result<&Block, LedgerError> {
        let proposal = self.chain.propose(payload, self.clock.now());
        let votes = self
            .online
            .iter()
            .filter_map(|id| self.validators.sign(id, &proposal.hash))
            .collect();
        self.chain.append(proposal, votes, &self.validators)
    }

    fn actor_entity(&self, actor: &str) -> Result<&str, LedgerError> {
        self.staff
            .get(actor)
            .map(|r| r.entity.as_str())
            .ok_or_else(|| LedgerError::Unauthorized(actor.into()))
    }

    fn existing(&self, event_id: &str) -> Result<&EventContract, LedgerError> {
        self.contracts
            .get(event_id)
            .ok_or_else(|| LedgerError::UnknownEvent(event_id.into()))
    }

    /// `Ok(None)` marks an accepted no-op that appends nothing.
    fn check(&self, tx: &ContractTransaction) -> Result<Option<()>, LedgerError> {
        let actor = tx.actor.as_str();
        let actor_entity = self.actor_entity(actor)?;
        match &tx.tx {
            TxBody::Create {
                event_id,
                entity,
                location,
                kind,
                risk_level,
                ..
            } => {
                if actor_entity != entity {
                    return Err(LedgerError::Unauthorized(actor.into()));
                }
                if event_id.is_empty() || self.contracts.contains_key(event_id) {
                    return Err(LedgerError::EventExists(event_id.clone()));
                }
                check_risk(*risk_level)?;
                if !location.is_valid() {
                    return Err(LedgerError::InvalidLocation);
                }
                let radius = f64::from(self.config.dedup_radius_m);
                if let Some(dup) = self.contracts.values().find(|c| {
                    c.state != EventState::Inactive
                        && c.kind == *kind
                        && c.location.distance_m(location) <= radius
                }) {
                    return Err(LedgerError::DuplicateEvent {
                        existing: dup.event_id.clone(),
                        kind: *kind,
                    });
                }
            }
            TxBody::Confirm {
                event_id,
                ratifier_location,
            } => {
                let c = self.existing(event_id)?;
                if c.generator == actor {
                    return Err(LedgerError::SelfRatification);
                }
                if !c.involves_entity(actor_entity) {
                    return Err(LedgerError::Unauthorized(actor.into()));
                }
                match c.state {
                    EventState::Verified => return Ok(None),
                    EventState::Inactive => {
                        return Err(LedgerError::WrongState {
                            expected: EventState::Created,
                            actual: c.state,
                        })
                    }
                    EventState::Created => {}
                }
                if !ratifier_location.is_valid() {
                    return Err(LedgerError::InvalidLocation);
                }
                let d = c.location.distance_m(ratifier_location);
                if d > f64::from(self.config.ratification_radius_m) {
                    return Err(LedgerError::TooFar {
                        distance_m: d,
                        limit_m: self.config.ratification_radius_m,
                    });
                }
            }
            TxBody::Abort { event_id } => {
                let c = self.existing(event_id)?;
                if c.entity != actor_entity {
                    return Err(LedgerError::Unauthorized(actor.into()));
                }
                if c.state != EventState::Created {
                    return Err(LedgerError::WrongState {
                        expected: EventState::Created,
                        actual: c.state,
                    });
                }
            }
            TxBody::UpdateParticipants { event_id, workers } => {
                let c = self.existing(event_id)?;
                if !c.involves_entity(actor_entity) {
                    return Err(LedgerError::Unauthorized(actor.into()));
                }
                live(c)?;
                let mut seen = BTreeSet::new();
                for w in workers {
                    let rec = self.staff.get(&w.user).ok_or_else(|| {
                        LedgerError::InvalidWorker(format!("{} is not registered", w.user))
                    })?;
                    if w.identity.is_empty()
                        || w.identity != rec.identity
                        || w.entity != rec.entity
                        || w.event_id != *event_id
                    {
                        return Err(LedgerError::InvalidWorker(format!(
                            "{} does not match the registry",
                            w.user
                        )));
                    }
                    if c.has_participant(&w.user) || !seen.insert(&w.user) {
                        return Err(LedgerError::DuplicateParticipant(w.user.clone()));
                    }
                }
            }
            TxBody::UpdateState {
                event_id,
                risk_level,
                state,
            } => {
                let c = self.existing(event_id)?;
                if !c.involves_entity(actor_entity) {
                    return Err(LedgerError::Unauthorized(actor.into()));
                }
                check_risk(*risk_level)?;
                if !c.state.can_become(*state) {
                    return Err(LedgerError::InvalidTransition {
                        from: c.state,
                        to: *state,
                    });
                }
            }
            TxBody::UpdateAccess { event_id, .. } => {
                let c = self.existing(event_id)?;
                if c.entity != actor_entity {
                    return Err(LedgerError::Unauthorized(actor.into()));
                }
                live(c)?;
            }
            TxBody::Kill { event_id } => {
                let c = self.existing(event_id)?;
                if c.entity != actor_entity {
                    return Err(LedgerError::Unauthorized(actor.into()));
                }
                if !c.state.can_become(EventState::Inactive) {
                    return Err(LedgerError::InvalidTransition {
                        from: c.state,
                        to: EventState::Inactive,
                    });
                }
            }
        }
        Ok(Some(()))
    }

    /// Applies a checked transaction committed at `block_index`.
    fn apply(&mut self, tx: &ContractTransaction, block_index: u64) -> Option<ContractEvent> {
        let event = match &tx.tx {
            TxBody::Create {
                event_id,
                entity,
                location,
                kind,
                risk_level,
                privacy_policy,
            } => {
                self.contracts.insert(
                    event_id.clone(),
                    EventContract {
                        event_id: event_id.clone(),
                        entity: entity.clone(),
                        generator: tx.actor.clone(),
                        privacy_policy: *privacy_policy,
                        location: *location,
                        kind: *kind,
                        risk_level: *risk_level,
                        state: EventState::Created,
                        participants: Vec::new(),
                        num_participants: 0,
                    },
                );
                Some(ContractEvent::EventGeneration(event_id.clone()))
            }
            TxBody::Confirm { event_id, .. } => {
                self.contract_mut(event_id).state = EventState::Verified;
                Some(ContractEvent::EventConfirmed(event_id.clone()))
            }
            TxBody::Abort { event_id } => {
                self.contract_mut(event_id).state = EventState::Inactive;
                Some(ContractEvent::EventAborted(event_id.clone()))
            }
            TxBody::UpdateParticipants { event_id, workers } => {
                let c = self.contract_mut(event_id);
                c.participants.extend(workers.iter().cloned());
                c.num_participants = c.participants.len();
                None
            }
            TxBody::UpdateState {
                event_id,
                risk_level,
                state,
            } => {
                let c = self.contract_mut(event_id);
                let before = c.state;
                c.risk_level = *risk_level;
                c.state = *state;
                match (before, *state) {
                    (EventState::Created, EventState::Verified) => {
                        Some(ContractEvent::EventConfirmed(event_id.clone()))
                    }
                    (EventState::Created, EventState::Inactive) => {
                        Some(ContractEvent::EventAborted(event_id.clone()))
                    }
                    _ => None,
                }
            }
            TxBody::UpdateAccess {
                event_id,
                privacy_policy,
            } => {
                self.contract_mut(event_id).privacy_policy = *privacy_policy;
                None
            }
            TxBody::Kill { event_id } => {
                self.contract_mut(event_id).state = EventState::Inactive;
                None
            }
        };
        if let Some(e) = &event {
            self.events.push((block_index, e.clone()));
        }
        event
    }

    fn contract_mut(&mut self, event_id: &str) -> &mut EventContract {
        self.contracts.get_mut(event_id).expect("checked before apply")
    }
}

fn check_risk(level: u8) -> Result<(), LedgerError> {
    if (MIN_RISK..=MAX_RISK).contains(&level) {
        Ok(())
    } else {
        Err(LedgerError::InvalidRiskLevel(level))
    }
}

fn live(c: &EventContract) -> Result<(), LedgerError> {
    if c.state == EventState::Inactive {
        return Err(LedgerError::WrongState {
            expected: EventState::Created,
            actual: c.state,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
