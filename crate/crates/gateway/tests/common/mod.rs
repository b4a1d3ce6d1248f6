#![allow(dead_code)]

use std::collections::BTreeMap;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::Value;
use tower::ServiceExt;

use emcoord_core::bilinear::BilinearEngine;
use emcoord_core::ibsc::{setup, MasterKey, SystemParams};
use emcoord_core::keyagree::{dh_keygen, dh_shared, SessionKey};
use emcoord_core::ledger::{Ledger, LedgerConfig, StaffRecord, StepClock, ValidatorSet};
use emcoord_gateway::{router, App, Gateway};

pub const LAT: f64 = 28.468;
pub const LON: f64 = -16.254;

pub fn staff() -> BTreeMap<String, StaffRecord> {
    [
        ("medic-1", "red-cross"),
        ("medic-2", "red-cross"),
        ("medic-3", "red-cross"),
        ("fire-1", "fire-dept"),
        ("fire-2", "fire-dept"),
        ("police-1", "police"),
    ]
    .into_iter()
    .map(|(id, entity)| {
        (
            id.to_string(),
            StaffRecord {
                entity: entity.into(),
                identity: format!("{id}@{entity}"),
            },
        )
    })
    .collect()
}

pub fn validators() -> ValidatorSet {
    ValidatorSet::derived(&["v0", "v1", "v2", "v3", "v4"], b"gateway-tests")
}

pub fn ledger() -> Ledger {
    Ledger::genesis(
        LedgerConfig::default(),
        staff(),
        validators(),
        Box::new(StepClock {
            next: 1_700_000_000,
            step: 10,
        }),
        Box::new(ChaCha20Rng::seed_from_u64(7)),
    )
    .unwrap()
}

pub struct Harness<E: BilinearEngine> {
    pub app: App<E>,
    pub router: Router,
    pub params: SystemParams<E>,
    pub msk: MasterKey,
    pub rng: ChaCha20Rng,
}

pub struct Client {
    pub token: String,
    pub key: SessionKey,
}

impl<E: BilinearEngine> Harness<E> {
    pub fn new(engine: E) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let (params, msk) = setup(engine, &mut rng);
        let app = Gateway::new(ledger(), params.clone(), msk.clone(), Some(5));
        Harness {
            router: router(app.clone()),
            app,
            params,
            msk,
            rng,
        }
    }

    pub async fn call(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or(Value::String(
                String::from_utf8_lossy(&bytes).into_owned(),
            ))
        };
        (status, value)
    }

    /// Runs the DH handshake and checks the key confirmation.
    pub async fn login(&mut self, actor: &str) -> Client {
        let engine = self.params.engine.clone();
        let mine = dh_keygen(&engine, &mut self.rng);
        let (status, v) = self
            .call(
                "POST",
                "/keys/dh",
                None,
                Some(serde_json::json!({
                    "actor": actor,
                    "public_key": B64.encode(engine.encode_g(&mine.pk)),
                })),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        let theirs = engine
            .decode_g(&B64.decode(v["public_key"].as_str().unwrap()).unwrap())
            .unwrap();
        let key = dh_shared(&engine, &mine, &theirs).unwrap();
        assert_eq!(
            B64.encode(key.confirmation()),
            v["confirmation"].as_str().unwrap()
        );
        Client {
            token: v["token"].as_str().unwrap().to_string(),
            key,
        }
    }
}

pub fn b64(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

pub fn unb64(v: &Value) -> Vec<u8> {
    B64.decode(v.as_str().unwrap()).unwrap()
}
