mod common;

use std::time::Duration;

use axum::http::StatusCode;
use serde_json::{json, Value};

use common::*;
use emcoord_core::bilinear::{BilinearEngine, ToyEngine, TypeAEngine};
use emcoord_core::ibsc::EventKeys;
use emcoord_core::keyagree::{open, SealedKeyMaterial};

/// Event with medic-1, medic-2, medic-3 and fire-1 on the participant list.
async fn staffed_event<E: BilinearEngine>(h: &Harness<E>, owner: &Client) -> String {
    let (_, v) = h
        .call(
            "POST",
            "/events",
            Some(&owner.token),
            Some(json!({"lat": LAT, "lon": LON, "kind": "fire", "risk_level": 3})),
        )
        .await;
    let id = v["event"]["event_id"].as_str().unwrap().to_string();
    let (s, v) = h
        .call(
            "POST",
            &format!("/events/{id}/participants"),
            Some(&owner.token),
            Some(json!({"users": ["medic-1", "medic-2", "medic-3", "fire-1"]})),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    id
}

async fn issue<E: BilinearEngine>(
    h: &Harness<E>,
    c: &Client,
    event: &str,
    x: f64,
) -> (StatusCode, Value) {
    h.call(
        "POST",
        "/keys/issue",
        Some(&c.token),
        Some(json!({"event_id": event, "x_m": x, "y_m": 0.0})),
    )
    .await
}

async fn issued_keys_are_sane<E: BilinearEngine>(engine: E) {
    let mut h = Harness::new(engine);
    let c = h.login("medic-1").await;
    let id = staffed_event(&h, &c).await;
    let (s, v) = issue(&h, &c, &id, 0.0).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["identity"], "medic-1@red-cross");
    let sealed = SealedKeyMaterial::from_bytes(&unb64(&v["sealed"])).unwrap();
    let plain = open(&c.key, &sealed).unwrap();
    let keys = EventKeys::from_bytes(&h.params.engine, &plain).unwrap();
    assert_eq!(keys.id, b"medic-1@red-cross");
    assert_eq!(keys.ctx.event_id, id);
    assert!(h.params.keys_are_sane(&keys.public, &keys.secret));

    // someone else's session key opens nothing
    let other = h.login("medic-2").await;
    assert!(open(&other.key, &sealed).is_err());
}

#[tokio::test]
async fn issue_toy_keys_open_and_verify() {
    issued_keys_are_sane(ToyEngine::demo()).await;
}

#[tokio::test]
async fn issue_production_keys_open_and_verify() {
    issued_keys_are_sane(TypeAEngine::new()).await;
}

#[tokio::test]
async fn issue_needs_session_and_membership() {
    let mut h = Harness::new(ToyEngine::demo());
    let c = h.login("medic-1").await;
    let id = staffed_event(&h, &c).await;
    let (s, v) = h
        .call("POST", "/keys/issue", None, Some(json!({"event_id": id})))
        .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert_eq!(v["code"], "unauthorized");

    let police = h.login("police-1").await;
    let (s, _) = issue(&h, &police, &id, 0.0).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = issue(&h, &c, "0000000000000000", 0.0).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

async fn inbox(h: &Harness<ToyEngine>, c: &Client, event: &str, since: u64) -> Value {
    let (s, v) = h
        .call(
            "GET",
            &format!("/chat/{event}/inbox?since={since}"),
            Some(&c.token),
            None,
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v
}

#[tokio::test]
async fn p2p_roundtrip_between_two_sessions() {
    let mut h = Harness::new(ToyEngine::demo());
    let alice = h.login("medic-1").await;
    let bob = h.login("medic-2").await;
    let id = staffed_event(&h, &alice).await;
    issue(&h, &alice, &id, 0.0).await;
    issue(&h, &bob, &id, 150.0).await;

    let (s, v) = h
        .call(
            "POST",
            &format!("/chat/{id}/p2p"),
            Some(&alice.token),
            Some(json!({"to": "medic-2", "body": b64(b"need water at gate 3")})),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["delivered"], 1);
    assert_eq!(v["targets"][0]["channel"], "WifiDirect");

    let got = inbox(&h, &bob, &id, 0).await;
    let msgs = got["messages"].as_array().unwrap();
    assert_eq!(msgs.len(), 1);
    assert_eq!(msgs[0]["sender_id"], "medic-1@red-cross");
    assert_eq!(msgs[0]["mode"], "p2p");
    assert_eq!(msgs[0]["kind"], "text");
    assert_eq!(unb64(&msgs[0]["body"]), b"need water at gate 3");
    assert!(inbox(&h, &alice, &id, 0).await["messages"]
        .as_array()
        .unwrap()
        .is_empty());

    // reply
    h.call(
        "POST",
        &format!("/chat/{id}/p2p"),
        Some(&bob.token),
        Some(json!({"to": "medic-1", "kind": "audio", "body": b64(&[7; 300])})),
    )
    .await;
    let got = inbox(&h, &alice, &id, 0).await;
    assert_eq!(got["messages"][0]["kind"], "audio");
}

#[tokio::test]
async fn inbox_cursor_is_monotone() {
    let mut h = Harness::new(ToyEngine::demo());
    let alice = h.login("medic-1").await;
    let bob = h.login("medic-2").await;
    let id = staffed_event(&h, &alice).await;
    issue(&h, &alice, &id, 0.0).await;
    issue(&h, &bob, &id, 10.0).await;

    let mut cursor = 0;
    let mut seen = Vec::new();
    for round in 0..4u8 {
        for k in 0..=round {
            h.call(
                "POST",
                &format!("/chat/{id}/p2p"),
                Some(&alice.token),
                Some(json!({"to": "medic-2", "body": b64(&[round, k])})),
            )
            .await;
        }
        let page = inbox(&h, &bob, &id, cursor).await;
        let next = page["cursor"].as_u64().unwrap();
        assert!(next > cursor);
        let seqs: Vec<u64> = page["messages"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m["seq"].as_u64().unwrap())
            .collect();
        assert_eq!(seqs.len(), round as usize + 1);
        assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        assert!(seqs.iter().all(|&s| s > cursor && s <= next));
        seen.extend(seqs);
        cursor = next;

        let empty = inbox(&h, &bob, &id, cursor).await;
        assert!(empty["messages"].as_array().unwrap().is_empty());
        assert_eq!(empty["cursor"].as_u64().unwrap(), cursor);
    }
    assert_eq!(seen.len(), 10);
}

#[tokio::test]
async fn long_poll_wakes_on_delivery() {
    let mut h = Harness::new(ToyEngine::demo());
    let alice = h.login("medic-1").await;
    let bob = h.login("medic-2").await;
    let id = staffed_event(&h, &alice).await;
    issue(&h, &alice, &id, 0.0).await;
    issue(&h, &bob, &id, 10.0).await;

    let h = std::sync::Arc::new(h);
    let poller = {
        let h = h.clone();
        let (id, token) = (id.clone(), bob.token.clone());
        tokio::spawn(async move {
            h.call(
                "GET",
                &format!("/chat/{id}/inbox?since=0&wait_ms=20000"),
                Some(&token),
                None,
            )
            .await
        })
    };
    tokio::time::sleep(Duration::from_millis(50)).await;
    let started = std::time::Instant::now();
    h.call(
        "POST",
        &format!("/chat/{id}/p2p"),
        Some(&alice.token),
        Some(json!({"to": "medic-2", "body": b64(b"ping")})),
    )
    .await;
    let (s, v) = poller.await.unwrap();
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["messages"].as_array().unwrap().len(), 1);
    assert!(started.elapsed() < Duration::from_secs(10));
}

#[tokio::test]
async fn broadcast_reaches_every_keyed_participant() {
    let mut h = Harness::new(ToyEngine::demo());
    let names = ["medic-1", "medic-2", "medic-3", "fire-1"];
    let mut clients = Vec::new();
    for n in names {
        clients.push(h.login(n).await);
    }
    let id = staffed_event(&h, &clients[0]).await;
    for (i, c) in clients.iter().enumerate() {
        let (s, v) = issue(&h, c, &id, 20.0 * i as f64).await;
        assert_eq!(s, StatusCode::OK, "{v}");
    }
    let (s, v) = h
        .call(
            "POST",
            &format!("/chat/{id}/broadcast"),
            Some(&clients[0].token),
            Some(json!({"body": b64(b"evacuate north")})),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["delivered"], 3);
    for c in &clients[1..] {
        let got = inbox(&h, c, &id, 0).await;
        assert_eq!(got["messages"][0]["mode"], "broadcast");
        assert_eq!(unb64(&got["messages"][0]["body"]), b"evacuate north");
    }
    assert!(inbox(&h, &clients[0], &id, 0).await["messages"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[tokio::test]
async fn chat_preconditions() {
    let mut h = Harness::new(ToyEngine::demo());
    let alice = h.login("medic-1").await;
    let bob = h.login("medic-2").await;
    let id = staffed_event(&h, &alice).await;

    let send = |to: &'static str| json!({"to": to, "body": b64(b"x")});
    let (s, v) = h
        .call("POST", &format!("/chat/{id}/p2p"), Some(&alice.token), Some(send("medic-2")))
        .await;
    assert_eq!(s, StatusCode::CONFLICT, "keys not issued: {v}");

    issue(&h, &alice, &id, 0.0).await;
    // bob has no device yet, so no beacon and no verification
    let (s, v) = h
        .call("POST", &format!("/chat/{id}/p2p"), Some(&alice.token), Some(send("medic-2")))
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "conflict");
    let (s, _) = h
        .call(
            "POST",
            &format!("/chat/{id}/broadcast"),
            Some(&alice.token),
            Some(json!({"body": b64(b"x")})),
        )
        .await;
    assert_eq!(s, StatusCode::CONFLICT);

    // out of every radio's reach
    issue(&h, &bob, &id, 500.0).await;
    let (s, v) = h
        .call("POST", &format!("/chat/{id}/p2p"), Some(&alice.token), Some(send("medic-2")))
        .await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");

    let (s, _) = h
        .call(
            "POST",
            &format!("/chat/{id}/p2p"),
            Some(&alice.token),
            Some(json!({"to": "medic-2", "body": "***"})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    issue(&h, &bob, &id, 10.0).await;
    let (s, _) = h
        .call(
            "POST",
            &format!("/chat/{id}/p2p"),
            Some(&alice.token),
            Some(json!({"to": "medic-2", "body": b64(&vec![0; 70_000])})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}
