use sha2::{Digest, Sha256};
use thiserror::Error;

/// BLE legacy advertising payload budget.
pub const BEACON_MAX_LEN: usize = 31;
pub const FINGERPRINT_LEN: usize = 8;
pub const MAX_BEACON_IDENTITY: usize = BEACON_MAX_LEN - FINGERPRINT_LEN;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BeaconError {
    #[error("identity of {0} bytes does not fit a beacon")]
    Oversize(usize),
    #[error("malformed beacon frame")]
    Malformed,
}

/// Truncated digest of an event id, small enough for an advert.
pub fn event_fingerprint(event_id: &str) -> [u8; FINGERPRINT_LEN] {
    let d = Sha256::new()
        .chain_update(b"emcoord beacon")
        .chain_update(event_id.as_bytes())
        .finalize();
    d[..FINGERPRINT_LEN].try_into().expect("digest is 32 bytes")
}

/// `fingerprint(8) || identity(1..=23)`. The identity length is implied by
/// the advert length, so truncation is only detectable below 9 bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeaconFrame {
    pub fingerprint: [u8; FINGERPRINT_LEN],
    pub identity: String,
}

impl BeaconFrame {
    pub fn new(identity: &str, event_id: &str) -> Result<Self, BeaconError> {
        if identity.is_empty() {
            return Err(BeaconError::Malformed);
        }
        if identity.len() > MAX_BEACON_IDENTITY {
            return Err(BeaconError::Oversize(identity.len()));
        }
        Ok(BeaconFrame {
            fingerprint: event_fingerprint(event_id),
            identity: identity.to_string(),
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FINGERPRINT_LEN + self.identity.len());
        out.extend_from_slice(&self.fingerprint);
        out.extend_from_slice(self.identity.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, BeaconError> {
        if bytes.len() <= FINGERPRINT_LEN || bytes.len() > BEACON_MAX_LEN {
            return Err(BeaconError::Malformed);
        }
        let identity =
            std::str::from_utf8(&bytes[FINGERPRINT_LEN..]).map_err(|_| BeaconError::Malformed)?;
        Ok(BeaconFrame {
            fingerprint: bytes[..FINGERPRINT_LEN].try_into().expect("length checked"),
            identity: identity.to_string(),
        })
    }

    pub fn is_for(&self, event_id: &str) -> bool {
        self.fingerprint == event_fingerprint(event_id)
    }
}

pub fn beacon_encode(identity: &str, event_id: &str) -> Result<Vec<u8>, BeaconError> {
    Ok(BeaconFrame::new(identity, event_id)?.encode())
}

pub fn beacon_decode(bytes: &[u8]) -> Result<BeaconFrame, BeaconError> {
    BeaconFrame::decode(bytes)
}
