//! Identity-based signcryption.
//!
//! A PKG runs [`setup`] once and issues private keys `S = msk * H1(id)`.
//! Keys are scoped to an incident by hashing the identity together with the
//! event's pre-shared data ([`EventContext`]), so a key leaked for one event
//! is useless for any other. On top of those keys sit a single-receiver mode
//! ([`signcrypt_p2p`]) and a multi-receiver mode ([`signcrypt_broadcast`]).

mod broadcast;
mod p2p;
pub mod poly;
mod wire;

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilinear::{h1_to_group, BilinearEngine, DecodeError, HashError, Scalar};

pub use broadcast::{
    signcrypt_broadcast, signcrypt_broadcast_with, unsigncrypt_broadcast, BroadcastEnvelope,
    BroadcastNonces,
};
pub use p2p::{signcrypt_p2p, signcrypt_p2p_with_nonce, unsigncrypt_p2p, P2PEnvelope};
pub use wire::{open_envelope, Envelope, Mode, OpenError, Opened, WireError, MAGIC, WIRE_VERSION};

/// Largest plaintext accepted by either mode.
pub const MAX_MESSAGE_LEN: usize = 64 * 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IbscError {
    #[error("identity must be nonempty")]
    EmptyId,
    #[error("message must be nonempty")]
    EmptyMessage,
    #[error("message of {0} bytes exceeds the {MAX_MESSAGE_LEN}-byte cap")]
    MessageTooLarge(usize),
    #[error("event id must be nonempty")]
    EmptyEventId,
    #[error("coordinates out of range: lat {lat}, lon {lon}")]
    InvalidCoordinates { lat: i64, lon: i64 },
    #[error("receiver list is empty")]
    NoReceivers,
    #[error("duplicate receiver id {0:?}")]
    DuplicateReceiver(String),
    #[error("receiver hash collision persisted after re-randomizing")]
    ReceiverCollision,
    #[error("malformed key material: {0}")]
    Decode(#[from] DecodeError),
}

impl From<HashError> for IbscError {
    fn from(e: HashError) -> Self {
        match e {
            HashError::EmptyInput => IbscError::EmptyId,
            HashError::ZeroLength => IbscError::EmptyMessage,
        }
    }
}

/// Verification failed. Carries no detail on purpose: callers must not be
/// able to distinguish which check failed.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("envelope rejected")]
pub struct Reject;

/// Public parameters: the engine, its generator `P`, and `mpk = msk * P`.
#[derive(Clone)]
pub struct SystemParams<E: BilinearEngine> {
    pub engine: E,
    pub generator: E::G,
    pub mpk: E::G,
}

impl<E: BilinearEngine> fmt::Debug for SystemParams<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemParams")
            .field("engine", &self.engine.description().name)
            .field("mpk", &hex::encode(self.engine.encode_g(&self.mpk)))
            .finish()
    }
}

impl<E: BilinearEngine> SystemParams<E> {
    /// SHA-256 over the engine name, `P` and `mpk`; short handle for ledgers.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.engine.description().name.as_bytes());
        h.update(self.engine.encode_g(&self.generator));
        h.update(self.engine.encode_g(&self.mpk));
        hex::encode(&h.finalize()[..16])
    }

    /// Checks `e(S, P) == e(Q, mpk)`, the test a client runs on key delivery.
    pub fn keys_are_sane(&self, public: &E::G, secret: &E::G) -> bool {
        let e = &self.engine;
        e.pair(secret, &self.generator) == e.pair(public, &self.mpk)
    }
}

/// The PKG's master secret.
#[derive(Clone, PartialEq, Eq)]
pub struct MasterKey {
    msk: Scalar,
}

impl fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterKey(<redacted>)")
    }
}

impl MasterKey {
    pub fn scalar(&self) -> &Scalar {
        &self.msk
    }

    pub fn to_bytes<E: BilinearEngine>(&self, engine: &E) -> Vec<u8> {
        engine.scalars().encode(&self.msk)
    }

    pub fn from_bytes<E: BilinearEngine>(engine: &E, bytes: &[u8]) -> Result<Self, IbscError> {
        let msk = engine.scalars().decode(bytes)?;
        if msk.is_zero() {
            return Err(DecodeError::OutOfRange.into());
        }
        Ok(MasterKey { msk })
    }
}

pub fn setup<E: BilinearEngine, R: RngCore + ?Sized>(
    engine: E,
    rng: &mut R,
) -> (SystemParams<E>, MasterKey) {
    let msk = engine.scalars().random_nonzero(rng);
    setup_with_secret(engine, msk)
}

/// Deterministic setup from a chosen nonzero `msk`. Test vectors use this.
pub fn setup_with_secret<E: BilinearEngine>(engine: E, msk: Scalar) -> (SystemParams<E>, MasterKey) {
    assert!(!msk.is_zero(), "master secret must be nonzero");
    let generator = engine.generator();
    let mpk = engine.scalar_mul(&msk, &generator);
    (
        SystemParams {
            engine,
            generator,
            mpk,
        },
        MasterKey { msk },
    )
}

/// Long-term identity keys `(Q_ID, S_ID)`.
#[derive(Clone, PartialEq, Eq)]
pub struct IdentityKeys<E: BilinearEngine> {
    pub id: Vec<u8>,
    pub public: E::G,
    pub secret: E::G,
}

impl<E: BilinearEngine> fmt::Debug for IdentityKeys<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdentityKeys")
            .field("id", &String::from_utf8_lossy(&self.id))
            .finish_non_exhaustive()
    }
}

pub fn extract<E: BilinearEngine>(
    params: &SystemParams<E>,
    msk: &MasterKey,
    id: &[u8],
) -> Result<IdentityKeys<E>, IbscError> {
    if id.is_empty() {
        return Err(IbscError::EmptyId);
    }
    let e = &params.engine;
    let public = h1_to_group(e, id)?;
    let secret = e.scalar_mul(&msk.msk, &public);
    Ok(IdentityKeys {
        id: id.to_vec(),
        public,
        secret,
    })
}

/// Signed fixed-point degrees with six decimals (micro-degrees).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MicroDegrees(pub i64);

impl MicroDegrees {
    pub fn from_degrees(deg: f64) -> Self {
        MicroDegrees((deg * 1e6).round() as i64)
    }

    pub fn degrees(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

/// `%.6f` rendering, computed from the integer so it is exact.
impl fmt::Display for MicroDegrees {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
    }
}

/// The pre-shared tuple binding keys to one incident.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventContext {
    pub event_id: String,
    pub lat: MicroDegrees,
    pub lon: MicroDegrees,
}

impl EventContext {
    pub fn new(
        event_id: impl Into<String>,
        lat: MicroDegrees,
        lon: MicroDegrees,
    ) -> Result<Self, IbscError> {
        let ctx = EventContext {
            event_id: event_id.into(),
            lat,
            lon,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), IbscError> {
        if self.event_id.is_empty() {
            return Err(IbscError::EmptyEventId);
        }
        if self.lat.0.abs() > 90_000_000 || self.lon.0.abs() > 180_000_000 {
            return Err(IbscError::InvalidCoordinates {
                lat: self.lat.0,
                lon: self.lon.0,
            });
        }
        Ok(())
    }

    /// `id || event_id || lat || lon`, each field u32-length-prefixed and the
    /// coordinates rendered as six-decimal strings.
    pub fn identity_input(&self, id: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for field in [
            id,
            self.event_id.as_bytes(),
            self.lat.to_string().as_bytes(),
            self.lon.to_string().as_bytes(),
        ] {
            out.extend_from_slice(&(field.len() as u32).to_be_bytes());
            out.extend_from_slice(field);
        }
        out
    }
}

/// Event-scoped keys `(Q_IDe, S_IDe)`.
#[derive(Clone, PartialEq, Eq)]
pub struct EventKeys<E: BilinearEngine> {
    pub ctx: EventContext,
    pub id: Vec<u8>,
    pub public: E::G,
    pub secret: E::G,
}

impl<E: BilinearEngine> fmt::Debug for EventKeys<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventKeys")
            .field("id", &String::from_utf8_lossy(&self.id))
            .field("event_id", &self.ctx.event_id)
            .finish_non_exhaustive()
    }
}

impl<E: BilinearEngine> EventKeys<E> {
    /// Binary form used when the PKG seals keys for delivery.
    pub fn to_bytes(&self, engine: &E) -> Vec<u8> {
        let mut out = Vec::new();
        wire::put_bytes16(&mut out, &self.id);
        wire::put_bytes16(&mut out, self.ctx.event_id.as_bytes());
        out.extend_from_slice(&self.ctx.lat.0.to_be_bytes());
        out.extend_from_slice(&self.ctx.lon.0.to_be_bytes());
        out.extend_from_slice(&engine.encode_g(&self.public));
        out.extend_from_slice(&engine.encode_g(&self.secret));
        out
    }

    pub fn from_bytes(engine: &E, bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = wire::Reader::new(bytes);
        let id = r.bytes16()?.to_vec();
        let event_id =
            String::from_utf8(r.bytes16()?.to_vec()).map_err(|_| WireError::InvalidText)?;
        let lat = MicroDegrees(i64::from_be_bytes(r.array::<8>()?));
        let lon = MicroDegrees(i64::from_be_bytes(r.array::<8>()?));
        let public = r.element(engine)?;
        let secret = r.element(engine)?;
        r.finish()?;
        let ctx = EventContext { event_id, lat, lon };
        ctx.validate().map_err(|_| WireError::InvalidText)?;
        Ok(EventKeys {
            ctx,
            id,
            public,
            secret,
        })
    }
}

/// Any participant can compute any peer's event public key.
pub fn derive_event_public<E: BilinearEngine>(
    params: &SystemParams<E>,
    peer_id: &[u8],
    ctx: &EventContext,
) -> Result<E::G, IbscError> {
    if peer_id.is_empty() {
        return Err(IbscError::EmptyId);
    }
    ctx.validate()?;
    Ok(h1_to_group(&params.engine, &ctx.identity_input(peer_id))?)
}

/// PKG side: derive `S_IDe = msk * Q_IDe`.
pub fn derive_event_keys<E: BilinearEngine>(
    params: &SystemParams<E>,
    msk: &MasterKey,
    id: &[u8],
    ctx: &EventContext,
) -> Result<EventKeys<E>, IbscError> {
    let public = derive_event_public(params, id, ctx)?;
    let secret = params.engine.scalar_mul(&msk.msk, &public);
    Ok(EventKeys {
        ctx: ctx.clone(),
        id: id.to_vec(),
        public,
        secret,
    })
}

pub(crate) fn check_message(m: &[u8]) -> Result<(), IbscError> {
    if m.is_empty() {
        return Err(IbscError::EmptyMessage);
    }
    if m.len() > MAX_MESSAGE_LEN {
        return Err(IbscError::MessageTooLarge(m.len()));
    }
    Ok(())
}

pub(crate) fn xor_in_place(data: &mut [u8], key: &[u8]) {
    for (d, k) in data.iter_mut().zip(key) {
        *d ^= k;
    }
}
