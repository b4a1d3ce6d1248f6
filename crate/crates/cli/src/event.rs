use serde_json::json;

use emcoord_core::ledger::{EventContract, Ledger, Location, Receipt};

use crate::exit::{CliError, CliResult, Exit};
use crate::store::Store;
use crate::{EventCmd, Out};

pub fn run(store: &Store, cmd: EventCmd, out: &Out) -> CliResult {
    let deployment = store.deployment()?;
    let mut ledger = store.ledger(&deployment, "event")?;
    let receipt = match cmd {
        EventCmd::Create {
            who,
            lat,
            lon,
            kind,
            risk,
            entity,
            policy,
        } => {
            let entity = match entity {
                Some(e) => e,
                None => {
                    ledger
                        .staff()
                        .get(&who.actor)
                        .ok_or_else(|| {
                            CliError::new(Exit::Policy, format!("{} is not registered staff", who.actor))
                        })?
                        .entity
                        .clone()
                }
            };
            ledger.create_event(&who.actor, &entity, location(lat, lon)?, kind, risk, policy)?
        }
        EventCmd::Ratify { event, who, lat, lon } => {
            ledger.ratify(&event, &who.actor, location(lat, lon)?)?
        }
        EventCmd::Abort { event, who } => ledger.abort_event(&event, &who.actor)?,
        EventCmd::Assign { event, who, users } => {
            let workers = users
                .iter()
                .map(|u| ledger.worker_for(&event, u))
                .collect::<Result<Vec<_>, _>>()?;
            ledger.update_participants(&event, workers, &who.actor)?
        }
        EventCmd::State {
            event,
            who,
            risk,
            state,
        } => ledger.update_state(&event, risk, state, &who.actor)?,
        EventCmd::Access { event, who, policy } => {
            ledger.update_access(&event, policy, &who.actor)?
        }
        EventCmd::Kill { event, who } => ledger.kill_event(&event, &who.actor)?,
        EventCmd::Show { event, actor } => return show(&ledger, &event, actor.as_deref(), out),
        EventCmd::List { state, kind } => {
            let events: Vec<&EventContract> = ledger
                .contracts()
                .filter(|c| state.is_none_or(|s| c.state == s))
                .filter(|c| kind.is_none_or(|k| c.kind == k))
                .collect();
            if out.json {
                println!("{}", serde_json::to_string(&events).expect("contracts serialize"));
            } else if events.is_empty() {
                println!("no events");
            } else {
                for c in events {
                    println!(
                        "{}  {:<8} {:<10} risk {}  {} {}  {} participants  ({})",
                        c.event_id,
                        c.state.to_string(),
                        c.kind.to_string(),
                        c.risk_level,
                        c.location.lat,
                        c.location.lon,
                        c.num_participants,
                        c.entity
                    );
                }
            }
            return Ok(());
        }
    };
    if receipt.block_index.is_some() {
        store.save_chain(&ledger)?;
    }
    print_receipt(&receipt, out);
    Ok(())
}

fn location(lat: f64, lon: f64) -> CliResult<Location> {
    let loc = Location::from_degrees(lat, lon);
    if !(lat.is_finite() && lon.is_finite() && loc.is_valid()) {
        return Err(CliError::usage(format!("({lat}, {lon}) is not a valid position")));
    }
    Ok(loc)
}

fn print_receipt(r: &Receipt, out: &Out) {
    out.emit(r, || {
        let c = &r.contract;
        let mut s = format!("event: {}\nstate: {}", c.event_id, c.state);
        match (&r.block_index, &r.block_hash) {
            (Some(i), Some(h)) => s.push_str(&format!("\nblock: #{i} {h}")),
            _ => s.push_str("\nblock: none (no change)"),
        }
        if let Some(ev) = &r.event {
            s.push_str(&format!("\nemitted: {}", emitted(ev)));
        }
        s.push_str(&format!("\nnum_participants: {}", c.num_participants));
        s
    });
}

fn emitted(ev: &emcoord_core::ledger::ContractEvent) -> String {
    use emcoord_core::ledger::ContractEvent as C;
    match ev {
        C::EventGeneration(id) => format!("EventGeneration({id})"),
        C::EventConfirmed(id) => format!("EventConfirmed({id})"),
        C::EventAborted(id) => format!("EventAborted({id})"),
    }
}

fn show(ledger: &Ledger, event: &str, actor: Option<&str>, out: &Out) -> CliResult {
    let c = ledger
        .contract(event)
        .ok_or_else(|| CliError::new(Exit::NotFound, format!("unknown event {event}")))?;
    let readable = actor.is_some_and(|a| ledger.may_read(c, a));
    let blocks: Vec<_> = ledger
        .chain()
        .blocks()
        .iter()
        .filter(|b| b.payload.event_id() == Some(event))
        .map(|b| {
            let op = match &b.payload {
                emcoord_core::ledger::BlockPayload::Transaction(tx) => format!("{:?}", tx.op()),
                _ => String::new(),
            };
            (b.index, b.hash_hex(), op)
        })
        .collect();
    let participants: Vec<&str> = if readable {
        c.participants.iter().map(|w| w.user.as_str()).collect()
    } else {
        Vec::new()
    };
    out.emit(
        &json!({
            "contract": c,
            "participants_visible": readable,
            "blocks": blocks.iter().map(|(i, h, op)| json!({"index": i, "hash": h, "op": op})).collect::<Vec<_>>(),
        }),
        || {
            let mut s = format!(
                "event: {}\nstate: {}\nkind: {}\nrisk_level: {}\nlocation: {}, {}\nentity: {}\ngenerator: {}\nprivacy_policy: {}\nnum_participants: {}",
                c.event_id,
                c.state,
                c.kind,
                c.risk_level,
                c.location.lat,
                c.location.lon,
                c.entity,
                c.generator,
                c.privacy_policy.as_str(),
                c.num_participants
            );
            if readable {
                s.push_str(&format!("\nparticipants: {}", participants.join(", ")));
            } else {
                s.push_str("\nparticipants: (hidden; pass --as with a permitted staff id)");
            }
            s.push_str("\nblocks:");
            for (i, h, op) in &blocks {
                s.push_str(&format!("\n  #{i} {h} {op}"));
            }
            s
        },
    );
    Ok(())
}
