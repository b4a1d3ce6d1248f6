//! HTTP front end for one deployment: the event ledger, the PKG and the
//! simulated chat plane behind a JSON API.
//!
//! Clients open a session with a Diffie-Hellman exchange (`POST /keys/dh`)
//! and then send `Authorization: Bearer <token>` on every other call except
//! `GET /health` and `GET /params`. All state sits behind one mutex, so
//! ledger writes are serialized. Chat devices live inside the gateway: a
//! session that fetches event keys also gets a node context placed in that
//! event's simulated radio medium, and frames it receives land in the
//! session's inbox.

mod error;
mod views;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::extract::{FromRequest, Path, Query, Request, State as AxState};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Notify;

use emcoord_core::bilinear::BilinearEngine;
use emcoord_core::comms::{NodeContext, PayloadKind, SimMedium};
use emcoord_core::ibsc::{derive_event_keys, MasterKey, SystemParams};
use emcoord_core::keyagree::{dh_keygen, dh_shared, seal, SessionKey, NONCE_LEN};
use emcoord_core::ledger::{AccessPolicy, EventKind, EventState, Ledger, Location, Receipt};

pub use error::{ApiError, ErrorCode};
pub use views::{DeliveryView, EventView, InboxItem, ReceiptView};

pub const DEFAULT_PORT: u16 = 8787;
/// Upper bound on inbox long-polls.
pub const MAX_WAIT_MS: u64 = 30_000;

struct Session {
    actor: String,
    key: SessionKey,
}

struct Device<E: BilinearEngine> {
    token: String,
    actor: String,
    node: NodeContext<E>,
}

struct Inner<E: BilinearEngine> {
    ledger: Ledger,
    params: SystemParams<E>,
    msk: MasterKey,
    rng: ChaCha20Rng,
    sessions: BTreeMap<String, Session>,
    /// (event_id, identity) -> device
    devices: BTreeMap<(String, String), Device<E>>,
    media: BTreeMap<String, SimMedium>,
    inbox: Vec<(String, InboxItem)>,
    next_seq: u64,
    chain_path: Option<PathBuf>,
}

pub struct Gateway<E: BilinearEngine> {
    inner: Mutex<Inner<E>>,
    delivered: Notify,
}

pub type App<E> = Arc<Gateway<E>>;

impl<E: BilinearEngine> Gateway<E> {
    pub fn new(ledger: Ledger, params: SystemParams<E>, msk: MasterKey, seed: Option<u64>) -> App<E> {
        let rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        Arc::new(Gateway {
            inner: Mutex::new(Inner {
                ledger,
                params,
                msk,
                rng,
                sessions: BTreeMap::new(),
                devices: BTreeMap::new(),
                media: BTreeMap::new(),
                inbox: Vec::new(),
                next_seq: 1,
                chain_path: None,
            }),
            delivered: Notify::new(),
        })
    }

    /// Rewrites the chain file after every committed block.
    pub fn persist_chain_to(&self, path: PathBuf) {
        self.lock().chain_path = Some(path);
    }

    /// Runs `f` against the ledger under the gateway lock.
    pub fn with_ledger<T>(&self, f: impl FnOnce(&Ledger) -> T) -> T {
        f(&self.lock().ledger)
    }

    /// Operator access, e.g. marking validators offline.
    pub fn with_ledger_mut<T>(&self, f: impl FnOnce(&mut Ledger) -> T) -> T {
        f(&mut self.lock().ledger)
    }

    fn lock(&self) -> MutexGuard<'_, Inner<E>> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router<E: BilinearEngine>(app: App<E>) -> Router {
    let gated = Router::new()
        .route("/keys/issue", post(issue_keys::<E>))
        .route("/events", post(create_event::<E>).get(list_events::<E>))
        .route("/events/{id}", get(show_event::<E>).delete(kill_event::<E>))
        .route("/events/{id}/ratify", post(ratify::<E>))
        .route("/events/{id}/abort", post(abort::<E>))
        .route("/events/{id}/participants", post(participants::<E>))
        .route("/events/{id}/state", post(update_state::<E>))
        .route("/events/{id}/access", post(update_access::<E>))
        .route("/events/{id}/ids", get(ids::<E>))
        .route("/events/{id}/shared", get(shared::<E>))
        .route("/chain", get(chain::<E>))
        .route("/chain/validate", get(validate::<E>))
        .route("/chat/{event}/p2p", post(chat_p2p::<E>))
        .route("/chat/{event}/broadcast", post(chat_broadcast::<E>))
        .route("/chat/{event}/inbox", get(inbox::<E>))
        .route_layer(middleware::from_fn_with_state(app.clone(), require_session::<E>));
    Router::new()
        .route("/health", get(|| async { Json(json!({"ok": true})) }))
        .route("/params", get(params::<E>))
        .route("/keys/dh", post(key_exchange::<E>))
        .merge(gated)
        .with_state(app)
}

/// Rejects unauthenticated calls before their bodies are parsed, so a bad
/// body from an anonymous client is still a 401.
async fn require_session<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    req: Request,
    next: Next,
) -> ApiResult<Response> {
    app.lock().session(req.headers())?;
    Ok(next.run(req).await)
}

pub async fn serve<E: BilinearEngine>(app: App<E>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(app)).await
}

/// JSON body whose rejections render as `bad_request`.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get("authorization")?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
}

impl<E: BilinearEngine> Inner<E> {
    /// Token and actor of the calling session.
    fn session(&self, headers: &HeaderMap) -> ApiResult<(String, String)> {
        let token = bearer(headers).ok_or_else(ApiError::no_session)?;
        let s = self.sessions.get(token).ok_or_else(ApiError::no_session)?;
        Ok((token.to_string(), s.actor.clone()))
    }

    fn persist(&self) {
        let Some(path) = &self.chain_path else { return };
        let tmp = path.with_extension("jsonl.tmp");
        let written = std::fs::write(&tmp, self.ledger.chain().to_jsonl())
            .and_then(|_| std::fs::rename(&tmp, path));
        if let Err(e) = written {
            eprintln!("warning: could not persist chain to {}: {e}", path.display());
        }
    }

    fn committed(&self, receipt: Receipt) -> ReceiptView {
        if receipt.block_index.is_some() {
            self.persist();
        }
        ReceiptView::from(receipt)
    }

    fn identity_of(&self, actor: &str) -> ApiResult<String> {
        self.ledger
            .staff()
            .get(actor)
            .map(|r| r.identity.clone())
            .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("unknown staff id {actor}")))
    }

    /// Every device of the event hears every other device's beacon and
    /// checks it against the id list it is allowed to read.
    fn discover(&mut self, event_id: &str) {
        let now = self.media.get(event_id).map_or(0, |m| m.clock);
        let beacons: Vec<(String, Vec<u8>)> = self
            .devices
            .range((event_id.to_string(), String::new())..)
            .take_while(|((e, _), _)| e == event_id)
            .filter_map(|((_, id), d)| Some((id.clone(), d.node.beacon().ok()?)))
            .collect();
        let medium = self.media.get(event_id);
        for ((e, me), device) in self.devices.iter_mut() {
            if e != event_id {
                continue;
            }
            let listed = self.ledger.get_ids(event_id, &device.actor).unwrap_or_default();
            for (other, beacon) in &beacons {
                if other == me {
                    continue;
                }
                let d = medium.and_then(|m| m.distance(me, other));
                let _ = device.node.ingest_beacon(beacon, &listed, now, d);
            }
        }
    }

    /// Moves frames off the air into the owning sessions' inboxes.
    fn deliver(&mut self, event_id: &str) -> usize {
        let Some(medium) = self.media.get_mut(event_id) else {
            return 0;
        };
        let mut count = 0;
        for ((e, id), device) in self.devices.iter_mut() {
            if e != event_id {
                continue;
            }
            for frame in medium.drain(id) {
                if let Ok(msg) = device.node.receive(&frame) {
                    let seq = self.next_seq;
                    self.next_seq += 1;
                    self.inbox
                        .push((device.token.clone(), InboxItem::new(seq, msg)));
                    count += 1;
                }
            }
        }
        count
    }
}

async fn params<E: BilinearEngine>(AxState(app): AxState<App<E>>) -> Json<Value> {
    let s = app.lock();
    let e = &s.params.engine;
    Json(json!({
        "engine": e.description().name,
        "insecure": e.insecure(),
        "fingerprint": s.params.fingerprint(),
        "generator": B64.encode(e.encode_g(&s.params.generator)),
        "mpk": B64.encode(e.encode_g(&s.params.mpk)),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DhRequest {
    actor: String,
    public_key: String,
}

async fn key_exchange<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Body(req): Body<DhRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let mut guard = app.lock();
    let s = &mut *guard;
    if !s.ledger.staff().contains_key(&req.actor) {
        return Err(ApiError::new(
            ErrorCode::Unauthorized,
            format!("{} is not registered staff", req.actor),
        ));
    }
    let engine = &s.params.engine;
    let raw = B64
        .decode(&req.public_key)
        .map_err(|e| ApiError::bad_request(format!("public_key: {e}")))?;
    let peer = engine
        .decode_g(&raw)
        .map_err(|e| ApiError::bad_request(format!("public_key: {e}")))?;
    let mine = dh_keygen(engine, &mut s.rng);
    let key = dh_shared(engine, &mine, &peer).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut raw_token = [0u8; 16];
    s.rng.fill_bytes(&mut raw_token);
    let token: String = raw_token.iter().map(|b| format!("{b:02x}")).collect();
    let body = json!({
        "token": token,
        "public_key": B64.encode(engine.encode_g(&mine.pk)),
        "confirmation": B64.encode(key.confirmation()),
        "fingerprint": key.fingerprint(),
        "params_ref": s.params.fingerprint(),
    });
    s.sessions.insert(
        token,
        Session {
            actor: req.actor,
            key,
        },
    );
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IssueRequest {
    event_id: String,
    /// Device position in the event's local plane, metres.
    #[serde(default)]
    x_m: f64,
    #[serde(default)]
    y_m: f64,
}

async fn issue_keys<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    headers: HeaderMap,
    Body(req): Body<IssueRequest>,
) -> ApiResult<Json<Value>> {
    let mut guard = app.lock();
    let s = &mut *guard;
    let (token, actor) = s.session(&headers)?;
    let contract = s
        .ledger
        .contract(&req.event_id)
        .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("unknown event {}", req.event_id)))?;
    if !contract.has_participant(&actor) {
        return Err(ApiError::new(
            ErrorCode::Unauthorized,
            format!("{actor} is not a participant of {}", req.event_id),
        ));
    }
    if contract.state == EventState::Inactive {
        return Err(ApiError::new(ErrorCode::Conflict, "event is inactive"));
    }
    if !(req.x_m.is_finite() && req.y_m.is_finite()) {
        return Err(ApiError::bad_request("position must be finite"));
    }
    let ctx = s.ledger.get_shared_data(&req.event_id, &actor)?.context()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let identity = s.identity_of(&actor)?;
    let keys = derive_event_keys(&s.params, &s.msk, identity.as_bytes(), &ctx)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut nonce = [0u8; NONCE_LEN];
    s.rng.fill_bytes(&mut nonce);
    let session_key = &s.sessions[&token].key;
    let sealed = seal(session_key, &keys.to_bytes(&s.params.engine), nonce);

    let node = NodeContext::new(s.params.clone(), keys);
    node.beacon()
        .map_err(|e| ApiError::bad_request(format!("identity {identity}: {e}")))?;
    s.media
        .entry(req.event_id.clone())
        .or_default()
        .place(&identity, req.x_m, req.y_m, true, true);
    s.devices.insert(
        (req.event_id.clone(), identity.clone()),
        Device {
            token,
            actor,
            node,
        },
    );
    Ok(Json(json!({
        "event_id": req.event_id,
        "identity": identity,
        "sealed": B64.encode(sealed.to_bytes()),
        "params_ref": s.params.fingerprint(),
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    entity: Option<String>,
    lat: f64,
    lon: f64,
    kind: EventKind,
    risk_level: u8,
    #[serde(default)]
    privacy_policy: AccessPolicy,
}

async fn create_event<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    headers: HeaderMap,
    Body(req): Body<CreateRequest>,
) -> ApiResult<(StatusCode, Json<ReceiptView>)> {
    let mut s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let entity = match req.entity {
        Some(e) => e,
        None => s.ledger.staff()[&actor].entity.clone(),
    };
    let r = s.ledger.create_event(
        &actor,
        &entity,
        Location::from_degrees(req.lat, req.lon),
        req.kind,
        req.risk_level,
        req.privacy_policy,
    )?;
    Ok((StatusCode::CREATED, Json(s.committed(r))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatifyRequest {
    lat: f64,
    lon: f64,
}

async fn ratify<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<RatifyRequest>,
) -> ApiResult<Json<ReceiptView>> {
    let mut s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let r = s
        .ledger
        .ratify(&id, &actor, Location::from_degrees(req.lat, req.lon))?;
    Ok(Json(s.committed(r)))
}

async fn abort<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<ReceiptView>> {
    let mut s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let r = s.ledger.abort_event(&id, &actor)?;
    Ok(Json(s.committed(r)))
}

async fn kill_event<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<ReceiptView>> {
    let mut s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let r = s.ledger.kill_event(&id, &actor)?;
    Ok(Json(s.committed(r)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParticipantsRequest {
    /// Staff ids to add.
    users: Vec<String>,
}

async fn participants<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<ParticipantsRequest>,
) -> ApiResult<Json<ReceiptView>> {
    let mut s = app.lock();
    let (_, actor) = s.session(&headers)?;
    if s.ledger.contract(&id).is_none() {
        return Err(ApiError::new(ErrorCode::NotFound, format!("unknown event {id}")));
    }
    let workers = req
        .users
        .iter()
        .map(|u| s.ledger.worker_for(&id, u))
        .collect::<Result<Vec<_>, _>>()?;
    let r = s.ledger.update_participants(&id, workers, &actor)?;
    Ok(Json(s.committed(r)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRequest {
    risk_level: u8,
    state: EventState,
}

async fn update_state<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<StateRequest>,
) -> ApiResult<Json<ReceiptView>> {
    let mut s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let r = s
        .ledger
        .update_state(&id, req.risk_level, req.state, &actor)?;
    Ok(Json(s.committed(r)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AccessRequest {
    privacy_policy: AccessPolicy,
}

async fn update_access<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<AccessRequest>,
) -> ApiResult<Json<ReceiptView>> {
    let mut s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let r = s.ledger.update_access(&id, req.privacy_policy, &actor)?;
    Ok(Json(s.committed(r)))
}

async fn list_events<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    headers: HeaderMap,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Json<Vec<EventView>>> {
    let s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let state: Option<EventState> = q
        .get("state")
        .map(|v| serde_json::from_value(Value::String(v.clone())))
        .transpose()
        .map_err(|_| ApiError::bad_request("state must be Created, Verified or Inactive"))?;
    let kind: Option<EventKind> = q
        .get("kind")
        .map(|v| v.parse())
        .transpose()
        .map_err(ApiError::bad_request)?;
    let views = s
        .ledger
        .contracts()
        .filter(|c| state.is_none_or(|st| c.state == st))
        .filter(|c| kind.is_none_or(|k| c.kind == k))
        .map(|c| EventView::render(c, s.ledger.may_read(c, &actor)))
        .collect();
    Ok(Json(views))
}

async fn show_event<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let c = s
        .ledger
        .contract(&id)
        .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("unknown event {id}")))?;
    let blocks: Vec<Value> = s
        .ledger
        .chain()
        .blocks()
        .iter()
        .filter(|b| b.payload.event_id() == Some(id.as_str()))
        .map(|b| json!({"index": b.index, "hash": b.hash_hex()}))
        .collect();
    Ok(Json(json!({
        "event": EventView::render(c, s.ledger.may_read(c, &actor)),
        "blocks": blocks,
    })))
}

async fn ids<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let ids = s.ledger.get_ids(&id, &actor)?;
    Ok(Json(json!({"event_id": id, "ids": ids})))
}

async fn shared<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let s = app.lock();
    let (_, actor) = s.session(&headers)?;
    let d = s.ledger.get_shared_data(&id, &actor)?;
    Ok(Json(json!({
        "event_id": d.event_id,
        "lat": d.lat.to_string(),
        "lon": d.lon.to_string(),
        "params_ref": d.params_ref,
    })))
}

async fn chain<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let s = app.lock();
    s.session(&headers)?;
    Ok(Json(json!({ "blocks": s.ledger.chain().blocks() })))
}

async fn validate<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    use emcoord_core::ledger::Validity;
    let s = app.lock();
    s.session(&headers)?;
    Ok(Json(match s.ledger.validate() {
        Validity::Valid => json!({"valid": true, "blocks": s.ledger.chain().len()}),
        Validity::Invalid(i) => json!({"valid": false, "invalid_index": i}),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    /// Staff id of the receiver; P2P only.
    to: Option<String>,
    #[serde(default = "text_kind")]
    kind: PayloadKind,
    /// Base64 payload.
    body: String,
}

fn text_kind() -> PayloadKind {
    PayloadKind::Text
}

fn chat_send<E: BilinearEngine>(
    app: &App<E>,
    event_id: &str,
    headers: &HeaderMap,
    req: ChatRequest,
    broadcast: bool,
) -> ApiResult<Json<DeliveryView>> {
    let mut guard = app.lock();
    let s = &mut *guard;
    let (_, actor) = s.session(headers)?;
    let body = B64
        .decode(&req.body)
        .map_err(|e| ApiError::bad_request(format!("body: {e}")))?;
    let me = s.identity_of(&actor)?;
    let key = (event_id.to_string(), me);
    if !s.devices.contains_key(&key) {
        return Err(ApiError::new(
            ErrorCode::Conflict,
            "no event keys issued to this actor; call /keys/issue first",
        ));
    }
    s.discover(event_id);
    let medium = s.media.entry(event_id.to_string()).or_default();
    let node = &s.devices[&key].node;
    let receipt = if broadcast {
        node.send_broadcast(medium, req.kind, &body, &mut s.rng)?
    } else {
        let to = req
            .to
            .ok_or_else(|| ApiError::bad_request("p2p needs a `to` staff id"))?;
        let peer = s
            .ledger
            .staff()
            .get(&to)
            .map(|r| r.identity.clone())
            .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("unknown staff id {to}")))?;
        node.send_p2p(medium, &peer, req.kind, &body, &mut s.rng)?
    };
    if s.deliver(event_id) > 0 {
        app.delivered.notify_waiters();
    }
    Ok(Json(DeliveryView::from(receipt)))
}

async fn chat_p2p<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(event): Path<String>,
    headers: HeaderMap,
    Body(req): Body<ChatRequest>,
) -> ApiResult<Json<DeliveryView>> {
    chat_send(&app, &event, &headers, req, false)
}

async fn chat_broadcast<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(event): Path<String>,
    headers: HeaderMap,
    Body(req): Body<ChatRequest>,
) -> ApiResult<Json<DeliveryView>> {
    if req.to.is_some() {
        return Err(ApiError::bad_request("broadcast takes no `to`"));
    }
    chat_send(&app, &event, &headers, req, true)
}

fn inbox_page<E: BilinearEngine>(
    app: &App<E>,
    event: &str,
    headers: &HeaderMap,
    since: u64,
) -> ApiResult<(u64, Vec<InboxItem>)> {
    let s = app.lock();
    let (token, _) = s.session(headers)?;
    let items: Vec<InboxItem> = s
        .inbox
        .iter()
        .filter(|(t, item)| *t == token && item.event_id == event && item.seq > since)
        .map(|(_, item)| item.clone())
        .collect();
    let cursor = items.last().map_or(since, |i| i.seq);
    Ok((cursor, items))
}

async fn inbox<E: BilinearEngine>(
    AxState(app): AxState<App<E>>,
    Path(event): Path<String>,
    headers: HeaderMap,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let num = |k: &str| -> ApiResult<u64> {
        q.get(k)
            .map(|v| v.parse::<u64>())
            .transpose()
            .map_err(|_| ApiError::bad_request(format!("{k} must be a non-negative integer")))
            .map(Option::unwrap_or_default)
    };
    let since = num("since")?;
    let wait = Duration::from_millis(num("wait_ms")?.min(MAX_WAIT_MS));
    let deadline = tokio::time::Instant::now() + wait;
    loop {
        let notified = app.delivered.notified();
        let (cursor, items) = inbox_page(&app, &event, &headers, since)?;
        if !items.is_empty() || tokio::time::Instant::now() >= deadline {
            return Ok(Json(json!({"cursor": cursor, "messages": items})));
        }
        let _ = tokio::time::timeout_at(deadline, notified).await;
    }
}
