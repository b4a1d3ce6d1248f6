use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::channel::Channel;

pub const FRAME_HEADER_LEN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Text,
    Image,
    Audio,
}

impl PayloadKind {
    pub fn to_byte(self) -> u8 {
        match self {
            PayloadKind::Text => 0,
            PayloadKind::Image => 1,
            PayloadKind::Audio => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(PayloadKind::Text),
            1 => Some(PayloadKind::Image),
            2 => Some(PayloadKind::Audio),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame shorter than its header")]
    Truncated,
    #[error("unknown channel byte {0}")]
    Channel(u8),
    #[error("unknown payload kind {0}")]
    Kind(u8),
}

/// `channel(1) || hop timestamp(8) || payload kind(1) || envelope`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportFrame {
    pub channel: Channel,
    pub timestamp: u64,
    pub kind: PayloadKind,
    pub envelope: Vec<u8>,
}

impl TransportFrame {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.envelope.len());
        out.push(self.channel.to_byte());
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.push(self.kind.to_byte());
        out.extend_from_slice(&self.envelope);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(FrameError::Truncated);
        }
        let channel = Channel::from_byte(bytes[0]).ok_or(FrameError::Channel(bytes[0]))?;
        let timestamp = u64::from_be_bytes(bytes[1..9].try_into().expect("8 bytes"));
        let kind = PayloadKind::from_byte(bytes[9]).ok_or(FrameError::Kind(bytes[9]))?;
        Ok(TransportFrame {
            channel,
            timestamp,
            kind,
            envelope: bytes[FRAME_HEADER_LEN..].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let f = TransportFrame {
            channel: Channel::Ble,
            timestamp: 0x0102030405060708,
            kind: PayloadKind::Audio,
            envelope: b"IBSC".to_vec(),
        };
        let bytes = f.encode();
        assert_eq!(bytes, [2, 1, 2, 3, 4, 5, 6, 7, 8, 2, b'I', b'B', b'S', b'C']);
        assert_eq!(TransportFrame::decode(&bytes).unwrap(), f);
        assert_eq!(TransportFrame::decode(&bytes[..9]), Err(FrameError::Truncated));
        let mut bad = bytes.clone();
        bad[0] = 9;
        assert_eq!(TransportFrame::decode(&bad), Err(FrameError::Channel(9)));
        bad = bytes;
        bad[9] = 3;
        assert_eq!(TransportFrame::decode(&bad), Err(FrameError::Kind(3)));
    }
}
