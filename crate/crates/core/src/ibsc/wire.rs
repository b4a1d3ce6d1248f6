//! Binary envelope format.
//!
//! ```text
//! "IBSC" | version:u8 | mode:u8 | sender_id:u16-len | event_id:u16-len | body
//! P2P body:       T | U | c:u32-len
//! broadcast body: T | U | W | X | V[32] | n:u16 | a_0 .. a_{n-1} | c:u32-len
//! ```
//!
//! All integers are big-endian; group elements and scalars use the engine's
//! fixed-width encodings.

use thiserror::Error;

use super::{
    unsigncrypt_broadcast, unsigncrypt_p2p, BroadcastEnvelope, EventKeys, P2PEnvelope, Reject,
    SystemParams,
};
use crate::bilinear::{BilinearEngine, DecodeError, Scalar, SEED_LEN};

pub const MAGIC: &[u8; 4] = b"IBSC";
pub const WIRE_VERSION: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("truncated input")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown mode {0:#04x}")]
    BadMode(u8),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("invalid text field")]
    InvalidText,
    #[error("empty field")]
    EmptyField,
    #[error("bad element: {0}")]
    Element(#[from] DecodeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    P2P,
    Broadcast,
}

impl Mode {
    fn byte(self) -> u8 {
        match self {
            Mode::P2P => 0x01,
            Mode::Broadcast => 0x02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Envelope<E: BilinearEngine> {
    P2P(P2PEnvelope<E>),
    Broadcast(BroadcastEnvelope<E>),
}

/// Outcome of opening a wire envelope.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OpenError {
    #[error("malformed envelope: {0}")]
    Malformed(#[from] WireError),
    #[error(transparent)]
    Reject(#[from] Reject),
}

impl<E: BilinearEngine> Envelope<E> {
    pub fn mode(&self) -> Mode {
        match self {
            Envelope::P2P(_) => Mode::P2P,
            Envelope::Broadcast(_) => Mode::Broadcast,
        }
    }

    pub fn sender_id(&self) -> &[u8] {
        match self {
            Envelope::P2P(e) => &e.sender_id,
            Envelope::Broadcast(e) => &e.sender_id,
        }
    }

    pub fn event_id(&self) -> &str {
        match self {
            Envelope::P2P(e) => &e.event_id,
            Envelope::Broadcast(e) => &e.event_id,
        }
    }

    pub fn encode(&self, engine: &E) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(WIRE_VERSION);
        out.push(self.mode().byte());
        put_bytes16(&mut out, self.sender_id());
        put_bytes16(&mut out, self.event_id().as_bytes());
        match self {
            Envelope::P2P(env) => {
                out.extend(engine.encode_g(&env.t));
                out.extend(engine.encode_g(&env.u));
                put_bytes32(&mut out, &env.c);
            }
            Envelope::Broadcast(env) => {
                for g in [&env.t, &env.u, &env.w, &env.x] {
                    out.extend(engine.encode_g(g));
                }
                out.extend_from_slice(&env.v);
                out.extend_from_slice(&(env.coeffs.len() as u16).to_be_bytes());
                for a in &env.coeffs {
                    out.extend(engine.scalars().encode(a));
                }
                put_bytes32(&mut out, &env.c);
            }
        }
        out
    }

    pub fn decode(engine: &E, bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(WireError::BadMagic);
        }
        let version = r.u8()?;
        if version != WIRE_VERSION {
            return Err(WireError::BadVersion(version));
        }
        let mode = r.u8()?;
        let sender_id = r.bytes16()?.to_vec();
        let event_id =
            String::from_utf8(r.bytes16()?.to_vec()).map_err(|_| WireError::InvalidText)?;
        if sender_id.is_empty() || event_id.is_empty() {
            return Err(WireError::EmptyField);
        }
        let env = match mode {
            0x01 => {
                let t = r.element(engine)?;
                let u = r.element(engine)?;
                let c = r.bytes32()?.to_vec();
                Envelope::P2P(P2PEnvelope {
                    sender_id,
                    event_id,
                    t,
                    u,
                    c,
                })
            }
            0x02 => {
                let t = r.element(engine)?;
                let u = r.element(engine)?;
                let w = r.element(engine)?;
                let x = r.element(engine)?;
                let v = r.array::<SEED_LEN>()?;
                let n = u16::from_be_bytes(r.array::<2>()?) as usize;
                if n == 0 {
                    return Err(WireError::EmptyField);
                }
                let coeffs = (0..n)
                    .map(|_| r.scalar(engine))
                    .collect::<Result<Vec<_>, _>>()?;
                let c = r.bytes32()?.to_vec();
                Envelope::Broadcast(BroadcastEnvelope {
                    sender_id,
                    event_id,
                    t,
                    u,
                    w,
                    x,
                    v,
                    coeffs,
                    c,
                })
            }
            other => return Err(WireError::BadMode(other)),
        };
        if env_c(&env).is_empty() {
            return Err(WireError::EmptyField);
        }
        r.finish()?;
        Ok(env)
    }
}

fn env_c<E: BilinearEngine>(env: &Envelope<E>) -> &[u8] {
    match env {
        Envelope::P2P(e) => &e.c,
        Envelope::Broadcast(e) => &e.c,
    }
}

/// A verified plaintext together with what the envelope claimed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opened {
    pub mode: Mode,
    pub sender_id: Vec<u8>,
    pub plaintext: Vec<u8>,
}

/// Decodes and unsigncrypts a wire envelope with the receiver's event keys.
/// The sender identity is taken from the envelope and authenticated by the
/// verification equations.
pub fn open_envelope<E: BilinearEngine>(
    params: &SystemParams<E>,
    receiver: &EventKeys<E>,
    bytes: &[u8],
) -> Result<Opened, OpenError> {
    let env = Envelope::decode(&params.engine, bytes)?;
    let sender_id = env.sender_id().to_vec();
    let mode = env.mode();
    let plaintext = match &env {
        Envelope::P2P(e) => unsigncrypt_p2p(params, receiver, &sender_id, e)?,
        Envelope::Broadcast(e) => unsigncrypt_broadcast(params, receiver, &sender_id, e)?,
    };
    Ok(Opened {
        mode,
        sender_id,
        plaintext,
    })
}

pub(crate) fn put_bytes16(out: &mut Vec<u8>, data: &[u8]) {
    let len = u16::try_from(data.len()).expect("field longer than 65535 bytes");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(data);
}

pub(crate) fn put_bytes32(out: &mut Vec<u8>, data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    out.extend_from_slice(data);
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(WireError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn bytes16(&mut self) -> Result<&'a [u8], WireError> {
        let n = u16::from_be_bytes(self.array::<2>()?) as usize;
        self.take(n)
    }

    pub(crate) fn bytes32(&mut self) -> Result<&'a [u8], WireError> {
        let n = u32::from_be_bytes(self.array::<4>()?) as usize;
        self.take(n)
    }

    pub(crate) fn element<E: BilinearEngine>(&mut self, engine: &E) -> Result<E::G, WireError> {
        let len = engine.description().element_len;
        Ok(engine.decode_g(self.take(len)?)?)
    }

    pub(crate) fn scalar<E: BilinearEngine>(&mut self, engine: &E) -> Result<Scalar, WireError> {
        let len = engine.scalars().width();
        Ok(engine.scalars().decode(self.take(len)?)?)
    }

    pub(crate) fn finish(self) -> Result<(), WireError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(WireError::Trailing(self.buf.len()))
        }
    }
}
