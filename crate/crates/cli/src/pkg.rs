use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rand::RngCore;
use serde_json::json;

use emcoord_core::bilinear::FromSpec;
use emcoord_core::ibsc::{derive_event_keys, extract, setup, EventKeys};
use emcoord_core::keyagree::{dh_keygen, dh_shared, open, seal, NONCE_LEN};
use emcoord_core::ledger::{EventState, Ledger, LedgerConfig, StaffRecord};

use crate::exit::{CliError, CliResult, Exit};
use crate::store::{self, default_staff, Deployment, PublicParams, Store, SEEDED_EPOCH};
use crate::{Out, PkgCmd};

pub struct InitOpts {
    pub force: bool,
    pub staff: Option<PathBuf>,
    pub validators: usize,
    pub dedup_radius_m: u32,
    pub ratification_radius_m: u32,
}

pub fn init<E: FromSpec>(store: &Store, engine: E, opts: InitOpts, out: &Out) -> CliResult {
    if store.initialized() && !opts.force {
        return Err(CliError::usage(format!(
            "{} already holds a deployment; pass --force to replace it",
            store.dir.display()
        )));
    }
    if opts.validators == 0 {
        return Err(CliError::usage("need at least one validator"));
    }
    let staff: BTreeMap<String, StaffRecord> = match &opts.staff {
        Some(path) => store::read_json(path)?,
        None => default_staff(),
    };
    if staff.is_empty() {
        return Err(CliError::usage("staff registry is empty"));
    }
    fs::create_dir_all(&store.dir)?;
    for stale in ["chain.jsonl", "keys", "mail"] {
        let p = store.path(stale);
        if p.is_dir() {
            fs::remove_dir_all(&p)?;
        } else if p.exists() {
            fs::remove_file(&p)?;
        }
    }

    let mut rng = store.rng("pkg-init");
    let (params, msk) = setup(engine.clone(), &mut rng);
    let e = &params.engine;
    let deployment = Deployment {
        engine: engine.spec(),
        validators: (0..opts.validators).map(|i| format!("validator-{i}")).collect(),
        validator_secret: store::random_secret(&mut rng),
    };
    let public = PublicParams {
        engine: e.description().name.clone(),
        insecure: e.insecure(),
        fingerprint: params.fingerprint(),
        generator: hex::encode(e.encode_g(&params.generator)),
        mpk: hex::encode(e.encode_g(&params.mpk)),
    };
    store.write_secret(&store.path("pkg.key"), hex::encode(msk.to_bytes(e)).as_bytes())?;
    store.write_atomic(
        &store.path("params.json"),
        serde_json::to_string_pretty(&public).expect("params serialize").as_bytes(),
    )?;

    let config = LedgerConfig {
        dedup_radius_m: opts.dedup_radius_m,
        ratification_radius_m: opts.ratification_radius_m,
        params_ref: public.fingerprint.clone(),
    };
    let ledger_rng = store.rng("genesis");
    let ledger = Ledger::genesis(
        config,
        staff,
        deployment.validator_set()?,
        store.clock(SEEDED_EPOCH - 1),
        Box::new(ledger_rng),
    )?;
    store.save_chain(&ledger)?;
    // written last: its presence marks a complete deployment
    store.write_atomic(
        &store.path("deployment.json"),
        serde_json::to_string_pretty(&deployment)
            .expect("deployment serializes")
            .as_bytes(),
    )?;

    out.emit(
        &json!({
            "engine": public.engine,
            "insecure": public.insecure,
            "fingerprint": public.fingerprint,
            "validators": deployment.validators.len(),
            "staff": ledger.staff().len(),
            "genesis": ledger.chain().blocks()[0].hash_hex(),
        }),
        || {
            let warn = if public.insecure { " (INSECURE toy engine)" } else { "" };
            format!(
                "initialized {}\nengine: {}{warn}\nparams: {}\nvalidators: {}\nstaff: {}\ngenesis: {}",
                store.dir.display(),
                public.engine,
                public.fingerprint,
                deployment.validators.len(),
                ledger.staff().len(),
                ledger.chain().blocks()[0].hash_hex()
            )
        },
    );
    Ok(())
}

pub fn run<E: FromSpec>(store: &Store, engine: E, cmd: PkgCmd, out: &Out) -> CliResult {
    match cmd {
        PkgCmd::Init { .. } => unreachable!("init runs before the deployment exists"),
        PkgCmd::Extract { id } => {
            if id.trim().is_empty() {
                return Err(CliError::usage("identity must not be empty"));
            }
            let (params, msk) = store.pkg(engine)?;
            let keys = extract(&params, &msk, id.as_bytes())
                .map_err(|e| CliError::usage(e.to_string()))?;
            let ok = params.keys_are_sane(&keys.public, &keys.secret);
            let public = hex::encode(params.engine.encode_g(&keys.public));
            out.emit(&json!({"id": id, "public": public, "sane": ok}), || {
                format!(
                    "id: {id}\npublic: {public}\ncheck e(S, P) == e(Q, mpk): {}",
                    if ok { "OK" } else { "FAILED" }
                )
            });
            if ok {
                Ok(())
            } else {
                Err(CliError::new(Exit::Reject, "extracted key failed the pairing check"))
            }
        }
        PkgCmd::Issue { actor, event } => issue(store, engine, &actor, &event, out),
    }
}

/// Runs the PKG and device sides of the key-agreement exchange in one
/// process, then stores the keys the device opened.
fn issue<E: FromSpec>(store: &Store, engine: E, actor: &str, event: &str, out: &Out) -> CliResult {
    let deployment = store.deployment()?;
    let ledger = store.ledger(&deployment, "issue")?;
    let contract = ledger
        .contract(event)
        .ok_or_else(|| CliError::new(Exit::NotFound, format!("unknown event {event}")))?;
    if !contract.has_participant(actor) {
        return Err(CliError::new(
            Exit::Policy,
            format!("{actor} is not a participant of {event}"),
        ));
    }
    if contract.state == EventState::Inactive {
        return Err(CliError::new(Exit::Policy, format!("event {event} is inactive")));
    }
    let ctx = ledger
        .get_shared_data(event, actor)?
        .context()
        .map_err(|e| CliError::failure(e.to_string()))?;
    let identity = ledger.staff()[actor].identity.clone();
    let (params, msk) = store.pkg(engine)?;
    let e = &params.engine;
    let mut rng = store.rng(&format!("issue/{event}/{actor}"));

    let device = dh_keygen(e, &mut rng);
    let server = dh_keygen(e, &mut rng);
    let server_key = dh_shared(e, &server, &device.pk).map_err(|x| CliError::failure(x.to_string()))?;
    let device_key = dh_shared(e, &device, &server.pk).map_err(|x| CliError::failure(x.to_string()))?;
    if server_key.confirmation() != device_key.confirmation() {
        return Err(CliError::new(Exit::Reject, "key confirmation mismatch"));
    }

    let keys = derive_event_keys(&params, &msk, identity.as_bytes(), &ctx)
        .map_err(|x| CliError::failure(x.to_string()))?;
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let sealed = seal(&server_key, &keys.to_bytes(e), nonce);

    let plain = open(&device_key, &sealed)
        .map_err(|_| CliError::new(Exit::Reject, "sealed key material failed to open"))?;
    let received = EventKeys::from_bytes(e, &plain)
        .map_err(|x| CliError::new(Exit::Reject, x.to_string()))?;
    if !params.keys_are_sane(&received.public, &received.secret) {
        return Err(CliError::new(Exit::Reject, "issued keys failed the pairing check"));
    }
    store.save_keys(e, &received)?;
    out.emit(
        &json!({
            "event_id": event,
            "actor": actor,
            "identity": identity,
            "session": device_key.fingerprint(),
            "sealed_bytes": sealed.to_bytes().len(),
            "sane": true,
        }),
        || {
            format!(
                "issued keys for {identity} on {event}\nsession: {}\nsealed: {} bytes\ncheck e(S, P) == e(Q, mpk): OK",
                device_key.fingerprint(),
                sealed.to_bytes().len()
            )
        },
    );
    Ok(())
}
