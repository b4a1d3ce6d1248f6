use std::path::Path;
use std::process::Command;

use serde_json::Value;

const LAT: &str = "28.468";
const LON: &str = "-16.254";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(self.stdout.trim())
            .unwrap_or_else(|e| panic!("not json ({e}): {}", self.stdout))
    }
}

fn emcoord(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_emcoord"))
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .env_remove("EMCOORD_DATA")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(dir: &Path, args: &[&str]) -> Run {
    let r = emcoord(dir, args);
    assert_eq!(r.code, 0, "{args:?} failed:\n{}\n{}", r.stdout, r.stderr);
    r
}

fn seeded<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["--seed", "5"];
    v.extend_from_slice(args);
    v
}

fn init(dir: &Path) {
    ok(dir, &seeded(&["--engine", "toy", "pkg", "init"]));
}

/// Creates, ratifies and staffs an event; returns its id.
fn staffed_event(dir: &Path) -> String {
    let created = ok(
        dir,
        &seeded(&["--json", "event", "create", "--as", "medic-1", "--lat", LAT, "--lon", LON, "--kind", "fire", "--risk", "3"]),
    )
    .json();
    let id = created["contract"]["event_id"].as_str().unwrap().to_string();
    ok(dir, &seeded(&["event", "ratify", &id, "--as", "medic-2", "--lat", "28.469", "--lon", LON]));
    ok(dir, &seeded(&["event", "assign", &id, "--as", "medic-1", "medic-1", "medic-2", "fire-1"]));
    id
}

#[test]
fn init_refuses_to_clobber() {
    let tmp = tempfile::tempdir().unwrap();
    init(tmp.path());
    let again = emcoord(tmp.path(), &["pkg", "init"]);
    assert_eq!(again.code, 2, "{}", again.stderr);
    ok(tmp.path(), &seeded(&["--engine", "toy", "pkg", "init", "--force"]));
}

#[test]
fn commands_before_init_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let r = emcoord(tmp.path(), &["event", "list"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("pkg init"), "{}", r.stderr);
}

#[test]
fn extract_checks_the_pairing() {
    let tmp = tempfile::tempdir().unwrap();
    init(tmp.path());
    let r = ok(tmp.path(), &["pkg", "extract", "alice@red-cross"]);
    assert!(r.stdout.contains("check e(S, P) == e(Q, mpk): OK"), "{}", r.stdout);
    assert_eq!(emcoord(tmp.path(), &["pkg", "extract", ""]).code, 2);
    assert_eq!(emcoord(tmp.path(), &["pkg", "extract", "  "]).code, 2);
}

#[test]
fn event_lifecycle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    init(dir);
    let id = staffed_event(dir);

    let shown = ok(dir, &["--json", "event", "show", &id, "--as", "medic-1"]).json();
    assert_eq!(shown["contract"]["state"], "Verified");
    assert_eq!(shown["contract"]["num_participants"], 3);
    assert_eq!(shown["participants_visible"], true);
    assert_eq!(shown["blocks"].as_array().unwrap().len(), 3);

    // police are neither participants nor the creating entity
    let hidden = ok(dir, &["--json", "event", "show", &id, "--as", "police-1"]).json();
    assert_eq!(hidden["participants_visible"], false);
    let text = ok(dir, &["event", "show", &id, "--as", "police-1"]).stdout;
    assert!(!text.contains("medic-2"), "{text}");

    let listed = ok(dir, &["--json", "event", "list", "--state", "Verified"]).json();
    assert_eq!(listed.as_array().unwrap().len(), 1);
    let none = ok(dir, &["--json", "event", "list", "--kind", "seismic"]).json();
    assert!(none.as_array().unwrap().is_empty());

    let killed = emcoord(dir, &["event", "kill", &id, "--as", "fire-1"]);
    assert_eq!(killed.code, 4, "{}", killed.stderr);
    ok(dir, &seeded(&["event", "kill", &id, "--as", "medic-1"]));
    let after = ok(dir, &["--json", "event", "show", &id]).json();
    assert_eq!(after["contract"]["state"], "Inactive");
    assert_eq!(ok(dir, &["chain", "validate"]).stdout.trim(), "Valid (5 blocks)");
}

#[test]
fn lifecycle_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    init(dir);
    let created = ok(
        dir,
        &seeded(&["--json", "event", "create", "--as", "medic-1", "--lat", LAT, "--lon", LON, "--kind", "fire", "--risk", "3"]),
    )
    .json();
    let id = created["contract"]["event_id"].as_str().unwrap().to_string();

    // 120 km away
    let far = emcoord(dir, &seeded(&["event", "ratify", &id, "--as", "medic-2", "--lat", "29.5", "--lon", LON]));
    assert_eq!(far.code, 4, "{}", far.stderr);
    let missing = emcoord(dir, &["event", "show", "0000000000000000"]);
    assert_eq!(missing.code, 6);
    let bad_risk = emcoord(dir, &seeded(&["event", "state", &id, "--as", "medic-1", "--risk", "9"]));
    assert_eq!(bad_risk.code, 2, "{}", bad_risk.stderr);
    let bad_lat = emcoord(dir, &seeded(&["event", "create", "--as", "fire-1", "--lat", "91", "--lon", "0", "--kind", "fire", "--risk", "1"]));
    assert_eq!(bad_lat.code, 2);

    // a second report nearby is a duplicate
    let dup = emcoord(dir, &seeded(&["event", "create", "--as", "fire-1", "--lat", "28.47", "--lon", LON, "--kind", "fire", "--risk", "2"]));
    assert_eq!(dup.code, 4, "{}", dup.stderr);
}

#[test]
fn seeded_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        init(dir);
        let id = staffed_event(dir);
        ok(dir, &seeded(&["pkg", "issue", "medic-1", "--event", &id]));
    }
    let chain = |d: &Path| std::fs::read(d.join("chain.jsonl")).unwrap();
    assert_eq!(chain(a.path()), chain(b.path()));
    let keys = |d: &Path| std::fs::read_dir(d.join("keys")).unwrap().count();
    assert_eq!(keys(a.path()), keys(b.path()));
}

#[test]
fn chat_roundtrip_and_inbox() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    init(dir);
    let id = staffed_event(dir);

    let early = emcoord(dir, &seeded(&["chat", "p2p", "--event", &id, "--from", "medic-1", "--to", "medic-2", "--text", "hi"]));
    assert_eq!(early.code, 4, "sender without keys: {}", early.stderr);
    assert!(early.stderr.contains("pkg issue"));

    for who in ["medic-1", "medic-2", "fire-1"] {
        let r = ok(dir, &seeded(&["pkg", "issue", who, "--event", &id]));
        assert!(r.stdout.contains("check e(S, P) == e(Q, mpk): OK"));
    }
    let outsider = emcoord(dir, &seeded(&["pkg", "issue", "police-1", "--event", &id]));
    assert_eq!(outsider.code, 4);

    let sent = ok(dir, &seeded(&["chat", "p2p", "--event", &id, "--from", "medic-1", "--to", "medic-2", "--text", "need a stretcher"]));
    assert!(
        sent.stdout.contains("medic-2@red-cross received from medic-1@red-cross [p2p]: need a stretcher"),
        "{}",
        sent.stdout
    );
    let cast = ok(dir, &seeded(&["--json", "chat", "broadcast", "--event", &id, "--from", "fire-1", "--text", "road blocked"])).json();
    assert_eq!(cast["delivered"], 2);
    assert_eq!(cast["received"].as_array().unwrap().len(), 2);

    // medic-1 at 0 m, fire-1 at 2 x 150 m: beyond every radio
    let far = emcoord(dir, &seeded(&["chat", "p2p", "--event", &id, "--from", "medic-1", "--to", "fire-1", "--spacing-m", "150", "--text", "x"]));
    assert_eq!(far.code, 4, "{}", far.stderr);

    let inbox = ok(dir, &["--json", "chat", "inbox", "--event", &id, "--as", "medic-2"]).json();
    let texts: Vec<&str> = inbox["messages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["text"].as_str().unwrap())
        .collect();
    assert_eq!(texts, ["need a stretcher", "road blocked"]);

    // flip one bit of the first stored frame
    let log = dir.join("mail").join(&id).join("medic-2@red-cross.log");
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    use base64::Engine as _;
    let b64 = base64::engine::general_purpose::STANDARD;
    let mut frame = b64.decode(&lines[0]).unwrap();
    let last = frame.len() - 3;
    frame[last] ^= 1;
    lines[0] = b64.encode(frame);
    std::fs::write(&log, lines.join("\n") + "\n").unwrap();

    let tampered = emcoord(dir, &["chat", "inbox", "--event", &id, "--as", "medic-2"]);
    assert_eq!(tampered.code, 3, "{}", tampered.stdout);
    assert!(tampered.stdout.contains("REJECT"));
    assert!(tampered.stdout.contains("road blocked"));
}

#[test]
fn chain_validate_finds_the_edited_block() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    init(dir);
    staffed_event(dir);
    assert_eq!(ok(dir, &["chain", "validate"]).stdout.trim(), "Valid (4 blocks)");

    let path = dir.join("chain.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let edited = text.replacen("\"risk_level\":3", "\"risk_level\":4", 1);
    assert_ne!(text, edited);
    std::fs::write(&path, edited).unwrap();

    let r = emcoord(dir, &["chain", "validate"]);
    assert_eq!(r.code, 3);
    assert_eq!(r.stdout.trim(), "Invalid(1)");
    // every other command refuses the damaged chain too
    assert_eq!(emcoord(dir, &["event", "list"]).code, 3);
}

#[test]
fn chain_show_lists_blocks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    init(dir);
    staffed_event(dir);
    let shown = ok(dir, &["chain", "show"]).stdout;
    assert!(shown.contains("Create") && shown.contains("UpdateParticipants"), "{shown}");
}

#[test]
fn sim_with_fixed_nodes() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("sim.json");
    // beacons at t = 0, 10, ..., 90; only the first two nodes are in range
    let r = ok(
        tmp.path(),
        &[
            "sim", "run", "--fixed", "0,0", "--fixed", "50,0", "--fixed", "200,0", "--range-m", "60",
            "--duration-s", "100", "--beacon-s", "10", "--out", report.to_str().unwrap(),
        ],
    );
    assert!(r.stdout.contains("Communications reached         20.0"), "{}", r.stdout);
    assert!(r.stdout.contains("Isolated nodes                 1.0"));
    assert!(r.stdout.contains("Communications received by node 6.7"));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(saved["metrics"]["communications_reached"], 20.0);
    assert_eq!(saved["config"]["node_count"], 3);

    let bad = emcoord(tmp.path(), &["sim", "run", "--nodes", "0"]);
    assert_eq!(bad.code, 2);
}

#[test]
fn sim_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--json", "--seed", "3", "sim", "run", "--nodes", "40", "--duration-s", "300", "--runs", "2"];
    let a = ok(tmp.path(), &args).json();
    let b = ok(tmp.path(), &args).json();
    assert_eq!(a, b);
}

#[test]
fn toy_engine_refused_for_production_data() {
    let tmp = tempfile::tempdir().unwrap();
    let r = emcoord(tmp.path(), &["--engine", "toy", "--production-data", "pkg", "init"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let r = emcoord(tmp.path(), &["--seed", "1", "--production-data", "pkg", "init"]);
    assert_eq!(r.code, 2);

    init(tmp.path());
    let r = emcoord(tmp.path(), &["--production-data", "event", "list"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let r = emcoord(tmp.path(), &["--engine", "production", "event", "list"]);
    assert_eq!(r.code, 2, "engine mismatch: {}", r.stderr);
}
