use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::*;

pub(crate) fn staff() -> BTreeMap<String, StaffRecord> {
    let mut m = BTreeMap::new();
    for (id, entity) in [
        ("medic-1", "red-cross"),
        ("medic-2", "red-cross"),
        ("medic-3", "red-cross"),
        ("fire-1", "fire-dept"),
        ("fire-2", "fire-dept"),
        ("police-1", "police"),
    ] {
        m.insert(
            id.to_string(),
            StaffRecord {
                entity: entity.into(),
                identity: format!("{id}@{entity}"),
            },
        );
    }
    m
}

fn ledger_with(validators: usize) -> Ledger {
    let ids: Vec<String> = (0..validators).map(|i| format!("v{i}")).collect();
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    Ledger::genesis(
        LedgerConfig::default(),
        staff(),
        ValidatorSet::derived(&refs, b"unit"),
        Box::new(StepClock {
            next: 1_700_000_000,
            step: 10,
        }),
        Box::new(ChaCha20Rng::seed_from_u64(7)),
    )
    .unwrap()
}

fn ledger() -> Ledger {
    ledger_with(5)
}

fn here() -> Location {
    Location::from_degrees(28.468, -16.254)
}

fn create(l: &mut Ledger) -> String {
    l.create_event(
        "medic-1",
        "red-cross",
        here(),
        EventKind::Fire,
        3,
        AccessPolicy::default(),
    )
    .unwrap()
    .contract
    .event_id
}

#[test]
fn create_starts_in_created() {
    let mut l = ledger();
    let r = l
        .create_event("medic-1", "red-cross", here(), EventKind::Fire, 3, AccessPolicy::default())
        .unwrap();
    assert_eq!(r.contract.state, EventState::Created);
    assert_eq!(r.contract.num_participants, 0);
    assert_eq!(r.block_index, Some(1));
    assert_eq!(r.event, Some(ContractEvent::EventGeneration(r.contract.event_id.clone())));
    assert_eq!(l.chain().len(), 2);
}

#[test]
fn duplicate_within_radius() {
    let mut l = ledger();
    let first = create(&mut l);
    // 0.009 degrees north, about 1 km
    let near = Location::from_degrees(28.477, -16.254);
    let err = l
        .create_event("medic-2", "red-cross", near, EventKind::Fire, 2, AccessPolicy::default())
        .unwrap_err();
    assert_eq!(
        err,
        LedgerError::DuplicateEvent {
            existing: first.clone(),
            kind: EventKind::Fire
        }
    );
    // different kind is a different event
    assert!(l
        .create_event("medic-2", "red-cross", near, EventKind::Flooding, 2, AccessPolicy::default())
        .is_ok());
    // an inactive event no longer blocks
    l.abort_event(&first, "medic-1").unwrap();
    assert!(l
        .create_event("medic-2", "red-cross", near, EventKind::Fire, 2, AccessPolicy::default())
        .is_ok());
}

#[test]
fn unregistered_or_foreign_generator() {
    let mut l = ledger();
    let before = l.chain().len();
    assert_eq!(
        l.create_event("ghost", "red-cross", here(), EventKind::Fire, 3, AccessPolicy::default()),
        Err(LedgerError::Unauthorized("ghost".into()))
    );
    assert_eq!(
        l.create_event("fire-1", "red-cross", here(), EventKind::Fire, 3, AccessPolicy::default()),
        Err(LedgerError::Unauthorized("fire-1".into()))
    );
    assert_eq!(l.chain().len(), before);
}

#[test]
fn bad_risk_and_location() {
    let mut l = ledger();
    assert_eq!(
        l.create_event("medic-1", "red-cross", here(), EventKind::Fire, 6, AccessPolicy::default()),
        Err(LedgerError::InvalidRiskLevel(6))
    );
    assert_eq!(
        l.create_event("medic-1", "red-cross", here(), EventKind::Fire, 0, AccessPolicy::default()),
        Err(LedgerError::InvalidRiskLevel(0))
    );
    let off = Location::new(MicroDegrees(90_000_001), MicroDegrees(0));
    assert_eq!(
        l.create_event("medic-1", "red-cross", off, EventKind::Fire, 1, AccessPolicy::default()),
        Err(LedgerError::InvalidLocation)
    );
}

use crate::ibsc::MicroDegrees;

#[test]
fn ratification_distance() {
    let mut l = ledger();
    let id = create(&mut l);
    // about 10 km south
    let far = Location::from_degrees(28.378, -16.254);
    assert!(matches!(
        l.ratify(&id, "medic-2", far),
        Err(LedgerError::TooFar { limit_m: 2000, .. })
    ));
    assert_eq!(l.ratify(&id, "medic-1", here()), Err(LedgerError::SelfRatification));
    // about 500 m north
    let near = Location::from_degrees(28.4725, -16.254);
    let r = l.ratify(&id, "medic-2", near).unwrap();
    assert_eq!(r.contract.state, EventState::Verified);
    assert_eq!(r.event, Some(ContractEvent::EventConfirmed(id.clone())));
    let len = l.chain().len();
    let again = l.ratify(&id, "medic-3", near).unwrap();
    assert_eq!(again.block_index, None);
    assert_eq!(l.chain().len(), len);
}

#[test]
fn ratifier_must_be_involved() {
    let mut l = ledger();
    let id = create(&mut l);
    assert_eq!(
        l.ratify(&id, "police-1", here()),
        Err(LedgerError::Unauthorized("police-1".into()))
    );
}

#[test]
fn abort_rules() {
    let mut l = ledger();
    let id = create(&mut l);
    assert_eq!(
        l.abort_event(&id, "fire-1"),
        Err(LedgerError::Unauthorized("fire-1".into()))
    );
    let r = l.abort_event(&id, "medic-2").unwrap();
    assert_eq!(r.contract.state, EventState::Inactive);
    assert_eq!(r.event, Some(ContractEvent::EventAborted(id.clone())));

    let other = l
        .create_event("medic-1", "red-cross", here(), EventKind::Seismic, 2, AccessPolicy::default())
        .unwrap()
        .contract
        .event_id;
    l.ratify(&other, "medic-2", here()).unwrap();
    assert_eq!(
        l.abort_event(&other, "medic-1"),
        Err(LedgerError::WrongState {
            expected: EventState::Created,
            actual: EventState::Verified
        })
    );
    let killed = l.kill_event(&other, "medic-1").unwrap();
    assert_eq!(killed.contract.state, EventState::Inactive);
}

#[test]
fn participants_and_counter() {
    let mut l = ledger();
    let id = create(&mut l);
    let workers: Vec<Worker> = ["medic-2", "fire-1", "fire-2"]
        .iter()
        .map(|u| l.worker_for(&id, u).unwrap())
        .collect();
    let r = l.update_participants(&id, workers, "medic-1").unwrap();
    assert_eq!(r.contract.num_participants, 3);
    assert_eq!(r.contract.participants.len(), 3);

    // fire-dept now participates and may add its own people, but not twice
    let dup = vec![l.worker_for(&id, "fire-1").unwrap()];
    assert_eq!(
        l.update_participants(&id, dup, "fire-2"),
        Err(LedgerError::DuplicateParticipant("fire-1".into()))
    );
    let mut spoofed = l.worker_for(&id, "police-1").unwrap();
    spoofed.identity = "medic-1@red-cross".into();
    assert!(matches!(
        l.update_participants(&id, vec![spoofed], "fire-2"),
        Err(LedgerError::InvalidWorker(_))
    ));
    let mut wrong_event = l.worker_for(&id, "police-1").unwrap();
    wrong_event.event_id = "other".into();
    assert!(matches!(
        l.update_participants(&id, vec![wrong_event], "fire-2"),
        Err(LedgerError::InvalidWorker(_))
    ));
    assert_eq!(
        l.update_participants(&id, vec![], "police-1"),
        Err(LedgerError::Unauthorized("police-1".into()))
    );
}

#[test]
fn update_state_appends_a_referencing_block() {
    let mut l = ledger();
    let id = create(&mut l);
    let len = l.chain().len();
    let r = l.update_state(&id, 5, EventState::Verified, "medic-2").unwrap();
    assert_eq!(r.contract.risk_level, 5);
    assert_eq!(l.chain().len(), len + 1);
    assert_eq!(l.chain().tip().unwrap().payload.event_id(), Some(id.as_str()));
    assert_eq!(
        l.update_state(&id, 5, EventState::Created, "medic-2"),
        Err(LedgerError::InvalidTransition {
            from: EventState::Verified,
            to: EventState::Created
        })
    );
    l.kill_event(&id, "medic-1").unwrap();
    assert!(matches!(
        l.update_state(&id, 1, EventState::Inactive, "medic-1"),
        Err(LedgerError::InvalidTransition { .. })
    ));
    assert!(matches!(
        l.kill_event(&id, "medic-1"),
        Err(LedgerError::InvalidTransition { .. })
    ));
}

#[test]
fn kill_and_access_need_the_owning_entity() {
    let mut l = ledger();
    let id = create(&mut l);
    let w = vec![l.worker_for(&id, "fire-1").unwrap()];
    l.update_participants(&id, w, "medic-1").unwrap();
    // participating but not owning
    assert_eq!(
        l.kill_event(&id, "fire-1"),
        Err(LedgerError::Unauthorized("fire-1".into()))
    );
    assert_eq!(
        l.update_access(&id, AccessPolicy::ParticipantsOnly, "fire-1"),
        Err(LedgerError::Unauthorized("fire-1".into()))
    );
    l.update_access(&id, AccessPolicy::ParticipantsOnly, "medic-3").unwrap();
}

#[test]
fn reads_follow_the_policy() {
    let mut l = ledger();
    let id = create(&mut l);
    let w = vec![l.worker_for(&id, "fire-1").unwrap()];
    l.update_participants(&id, w, "medic-1").unwrap();

    assert_eq!(l.get_ids(&id, "fire-1").unwrap(), vec!["fire-1@fire-dept"]);
    // same entity as a participant
    assert!(l.get_ids(&id, "fire-2").is_ok());
    // owning entity
    assert!(l.get_ids(&id, "medic-3").is_ok());
    assert_eq!(
        l.get_ids(&id, "police-1"),
        Err(LedgerError::AccessDenied("police-1".into()))
    );
    assert_eq!(
        l.get_shared_data(&id, "stranger"),
        Err(LedgerError::AccessDenied("stranger".into()))
    );
    let shared = l.get_shared_data(&id, "fire-1").unwrap();
    assert_eq!(shared.lat.to_string(), "28.468000");
    assert_eq!(shared.lon.to_string(), "-16.254000");
    assert_eq!(shared.context().unwrap().event_id, id);

    l.update_access(&id, AccessPolicy::ParticipantsOnly, "medic-1").unwrap();
    assert!(l.get_ids(&id, "fire-1").is_ok());
    assert!(l.get_ids(&id, "fire-2").is_err());
    assert!(l.get_ids(&id, "medic-1").is_err());
    assert_eq!(l.get_ids("nope", "fire-1"), Err(LedgerError::UnknownEvent("nope".into())));
}

#[test]
fn quorum_outage_leaves_state_untouched() {
    let mut l = ledger_with(5);
    let id = create(&mut l);
    l.set_online(["v0", "v1"]);
    let len = l.chain().len();
    assert_eq!(
        l.ratify(&id, "medic-2", here()),
        Err(LedgerError::QuorumNotReached {
            votes: 2,
            required: 3,
            validators: 5
        })
    );
    assert_eq!(l.chain().len(), len);
    assert_eq!(l.contract(&id).unwrap().state, EventState::Created);
    l.set_online(["v0", "v1", "v4"]);
    assert!(l.ratify(&id, "medic-2", here()).is_ok());
}

#[test]
fn genesis_block_shape() {
    let l = ledger();
    let g = &l.chain().blocks()[0];
    assert_eq!(g.index, 0);
    assert_eq!(g.prev_hash, genesis_prev_hash());
    assert_eq!(g.votes.len(), 5);
    assert_eq!(l.validate(), Validity::Valid);
}

#[test]
fn load_rebuilds_state() {
    let mut l = ledger();
    let id = create(&mut l);
    let w = vec![l.worker_for(&id, "fire-1").unwrap()];
    l.update_participants(&id, w, "medic-1").unwrap();
    l.ratify(&id, "medic-2", here()).unwrap();
    let blocks = parse_jsonl(&l.chain().to_jsonl()).unwrap();
    let loaded = Ledger::load(
        blocks,
        l.validators().clone(),
        Box::new(SystemClock),
        Box::new(ChaCha20Rng::seed_from_u64(0)),
    )
    .unwrap();
    assert_eq!(loaded.contract(&id), l.contract(&id));
    assert_eq!(loaded.events(), l.events());
    assert_eq!(loaded.chain(), l.chain());
}

#[test]
fn replay_is_byte_identical() {
    let mut l = ledger();
    let id = create(&mut l);
    l.ratify(&id, "medic-2", here()).unwrap();
    l.update_state(&id, 4, EventState::Verified, "medic-1").unwrap();
    let genesis_ts = l.chain().blocks()[0].timestamp;
    let replayed = Ledger::replay(
        LedgerConfig::default(),
        staff(),
        l.validators().clone(),
        genesis_ts,
        &l.transaction_log(),
        Box::new(ChaCha20Rng::seed_from_u64(99)),
    )
    .unwrap();
    assert_eq!(replayed.chain().to_jsonl(), l.chain().to_jsonl());
}
