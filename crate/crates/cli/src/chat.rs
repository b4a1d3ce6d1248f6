//! Several devices in one process, talking over the simulated radios.
//!
//! Every participant holding issued keys gets a device, placed on a line
//! `--spacing-m` apart in participant order. Devices swap beacons and check
//! them against the event's id list before anything is sent. Delivered
//! frames are appended to the receiver's mailbox so `chat inbox` can reopen
//! them later.

use std::fs::{self, OpenOptions};
use std::io::Write;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::Serialize;
use serde_json::json;

use emcoord_core::bilinear::FromSpec;
use emcoord_core::comms::{
    ChatMessage, CommsError, Delivery, DeliveryReceipt, NodeContext, PayloadKind, ReceiveError,
    SimMedium,
};
use emcoord_core::ledger::Ledger;

use crate::exit::{CliError, CliResult, Exit};
use crate::store::Store;
use crate::{ChatCmd, ChatOpts, Out};

struct Device<E: emcoord_core::bilinear::BilinearEngine> {
    actor: String,
    node: NodeContext<E>,
}

impl From<CommsError> for CliError {
    fn from(e: CommsError) -> Self {
        let exit = match e {
            CommsError::Oversize(_) => Exit::Usage,
            CommsError::Crypto(_) => Exit::Failure,
            _ => Exit::Policy,
        };
        CliError::new(exit, e.to_string())
    }
}

pub fn run<E: FromSpec>(store: &Store, engine: E, cmd: ChatCmd, out: &Out) -> CliResult {
    let deployment = store.deployment()?;
    let ledger = store.ledger(&deployment, "chat")?;
    match cmd {
        ChatCmd::P2p { opts, to } => send(store, engine, &ledger, &opts, Some(&to), out),
        ChatCmd::Broadcast { opts } => send(store, engine, &ledger, &opts, None, out),
        ChatCmd::Inbox { event, who } => inbox(store, engine, &ledger, &event, &who.actor, out),
    }
}

fn identity_of(ledger: &Ledger, actor: &str) -> CliResult<String> {
    ledger
        .staff()
        .get(actor)
        .map(|r| r.identity.clone())
        .ok_or_else(|| CliError::new(Exit::NotFound, format!("unknown staff id {actor}")))
}

fn devices<E: FromSpec>(
    store: &Store,
    engine: &E,
    ledger: &Ledger,
    event: &str,
) -> CliResult<Vec<Device<E>>> {
    let contract = ledger
        .contract(event)
        .ok_or_else(|| CliError::new(Exit::NotFound, format!("unknown event {event}")))?;
    let params = store.public_params(engine.clone())?;
    let mut out = Vec::new();
    for w in &contract.participants {
        if let Some(keys) = store.load_keys(engine, event, &w.identity)? {
            out.push(Device {
                actor: w.user.clone(),
                node: NodeContext::new(params.clone(), keys),
            });
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct Received {
    to: String,
    from: String,
    mode: String,
    text: String,
}

fn send<E: FromSpec>(
    store: &Store,
    engine: E,
    ledger: &Ledger,
    opts: &ChatOpts,
    to: Option<&str>,
    out: &Out,
) -> CliResult {
    if !(opts.spacing_m.is_finite() && opts.spacing_m >= 0.0) {
        return Err(CliError::usage("--spacing-m must be a non-negative distance"));
    }
    let event = opts.event.as_str();
    let mut devs = devices(store, &engine, ledger, event)?;
    let sender_id = identity_of(ledger, &opts.from)?;
    let Some(sender) = devs.iter().position(|d| d.node.identity() == sender_id) else {
        return Err(CliError::new(
            Exit::Policy,
            format!("{} holds no keys for {event}; run `pkg issue` first", opts.from),
        ));
    };

    let mut medium = SimMedium::new();
    for (i, d) in devs.iter().enumerate() {
        medium.place(d.node.identity(), i as f64 * opts.spacing_m, 0.0, true, true);
    }
    let beacons: Vec<(String, Vec<u8>)> = devs
        .iter()
        .map(|d| Ok((d.node.identity().to_string(), d.node.beacon().map_err(|e| CliError::failure(e.to_string()))?)))
        .collect::<CliResult<_>>()?;
    for d in devs.iter_mut() {
        let listed = ledger.get_ids(event, &d.actor).unwrap_or_default();
        for (other, beacon) in &beacons {
            if other != d.node.identity() {
                let dist = medium.distance(d.node.identity(), other);
                let _ = d.node.ingest_beacon(beacon, &listed, medium.clock, dist);
            }
        }
    }

    let mut rng = store.rng(&format!("chat/{event}/{}", opts.from));
    let body = opts.text.as_bytes();
    let receipt: DeliveryReceipt = match to {
        Some(peer) => {
            let peer_id = identity_of(ledger, peer)?;
            devs[sender].node.send_p2p(&mut medium, &peer_id, PayloadKind::Text, body, &mut rng)?
        }
        None => devs[sender].node.send_broadcast(&mut medium, PayloadKind::Text, body, &mut rng)?,
    };

    let mut received = Vec::new();
    let mut rejected = 0;
    for d in devs.iter_mut() {
        let frames = medium.drain(d.node.identity());
        if frames.is_empty() {
            continue;
        }
        let path = store.mailbox(event, d.node.identity());
        fs::create_dir_all(path.parent().expect("mailbox has a parent"))?;
        let mut mailbox = OpenOptions::new().create(true).append(true).open(&path)?;
        for frame in frames {
            writeln!(mailbox, "{}", B64.encode(&frame))?;
            match d.node.receive(&frame) {
                Ok(msg) => received.push(render(d.node.identity(), &msg)),
                Err(_) => rejected += 1,
            }
        }
    }

    let delivered = receipt.delivered();
    out.emit(
        &json!({
            "event_id": event,
            "delivered": delivered,
            "undeliverable": receipt.undeliverable(),
            "targets": receipt.targets,
            "received": received,
            "rejected": rejected,
        }),
        || {
            let mut s = String::new();
            for (id, d) in &receipt.targets {
                match d {
                    Delivery::Delivered {
                        channel,
                        delay_secs,
                    } => s.push_str(&format!("-> {id}: {channel:?}, {:.3} ms\n", delay_secs * 1e3)),
                    Delivery::Undeliverable { reason } => {
                        s.push_str(&format!("-> {id}: undeliverable ({reason:?})\n"))
                    }
                }
            }
            for r in &received {
                s.push_str(&format!("{} received from {} [{}]: {}\n", r.to, r.from, r.mode, r.text));
            }
            s.trim_end().to_string()
        },
    );
    if rejected > 0 {
        return Err(CliError::new(Exit::Reject, format!("{rejected} frame(s) rejected")));
    }
    if delivered == 0 {
        return Err(CliError::new(Exit::Policy, "no target was reachable"));
    }
    Ok(())
}

fn render(to: &str, msg: &ChatMessage) -> Received {
    Received {
        to: to.to_string(),
        from: msg.sender_id.clone(),
        mode: format!("{:?}", msg.mode).to_lowercase(),
        text: String::from_utf8_lossy(&msg.body).into_owned(),
    }
}

fn inbox<E: FromSpec>(
    store: &Store,
    engine: E,
    ledger: &Ledger,
    event: &str,
    actor: &str,
    out: &Out,
) -> CliResult {
    if ledger.contract(event).is_none() {
        return Err(CliError::new(Exit::NotFound, format!("unknown event {event}")));
    }
    let identity = identity_of(ledger, actor)?;
    let keys = store.load_keys(&engine, event, &identity)?.ok_or_else(|| {
        CliError::new(Exit::Policy, format!("{actor} holds no keys for {event}"))
    })?;
    let mut node = NodeContext::new(store.public_params(engine)?, keys);
    let text = fs::read_to_string(store.mailbox(event, &identity)).unwrap_or_default();

    let mut messages = Vec::new();
    let mut failures = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let outcome = B64
            .decode(line.trim())
            .map_err(|e| ReceiveError::Malformed(e.to_string()))
            .and_then(|frame| node.receive(&frame));
        match outcome {
            Ok(msg) => messages.push(render(&identity, &msg)),
            Err(e) => failures.push(json!({"line": i + 1, "error": e.to_string()})),
        }
    }
    let stats = node.stats();
    out.emit(
        &json!({"messages": messages, "failures": failures, "stats": stats}),
        || {
            let mut s = String::new();
            for m in &messages {
                s.push_str(&format!("{} [{}]: {}\n", m.from, m.mode, m.text));
            }
            for f in &failures {
                s.push_str(&format!("line {}: REJECT ({})\n", f["line"], f["error"].as_str().unwrap_or("")));
            }
            s.push_str(&format!(
                "{} accepted, {} rejected, {} malformed",
                stats.accepted, stats.rejected, stats.malformed
            ));
            s
        },
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(
            Exit::Reject,
            format!("{} frame(s) failed verification", failures.len()),
        ))
    }
}
