use serde::{Deserialize, Serialize};

pub const WIFI_DIRECT_RANGE_M: f64 = 200.0;
pub const BLE_RANGE_M: f64 = 60.0;
pub const WIFI_DIRECT_RATE_BPS: f64 = 250e6;
pub const BLE_RATE_BPS: f64 = 25e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    WifiDirect,
    Ble,
}

impl Channel {
    pub fn range_m(self) -> f64 {
        match self {
            Channel::WifiDirect => WIFI_DIRECT_RANGE_M,
            Channel::Ble => BLE_RANGE_M,
        }
    }

    pub fn rate_bps(self) -> f64 {
        match self {
            Channel::WifiDirect => WIFI_DIRECT_RATE_BPS,
            Channel::Ble => BLE_RATE_BPS,
        }
    }

    /// Serialization delay of `bytes` on this channel, in seconds.
    pub fn transfer_secs(self, bytes: usize) -> f64 {
        bytes as f64 * 8.0 / self.rate_bps()
    }

    pub fn to_byte(self) -> u8 {
        match self {
            Channel::WifiDirect => 1,
            Channel::Ble => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Channel::WifiDirect),
            2 => Some(Channel::Ble),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelMode {
    WifiDirect,
    Ble,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelReason {
    WithinWifiRange,
    WithinBleRange,
    /// Distance unknown: try the preferred radio and fall back on failure.
    UnknownDistance,
    OutOfRange,
    NoRadio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDecision {
    pub mode: ChannelMode,
    pub reason: ChannelReason,
}

impl ChannelDecision {
    pub fn channel(&self) -> Option<Channel> {
        match self.mode {
            ChannelMode::WifiDirect => Some(Channel::WifiDirect),
            ChannelMode::Ble => Some(Channel::Ble),
            ChannelMode::None => None,
        }
    }
}

/// Wi-Fi Direct whenever it is up and in range, BLE only as the fallback.
pub fn select_channel(distance_m: Option<f64>, wifi: bool, ble: bool) -> ChannelDecision {
    use ChannelMode as M;
    use ChannelReason as R;
    let (mode, reason) = match distance_m {
        _ if !wifi && !ble => (M::None, R::NoRadio),
        None if wifi => (M::WifiDirect, R::UnknownDistance),
        None => (M::Ble, R::UnknownDistance),
        Some(d) if wifi && d <= WIFI_DIRECT_RANGE_M => (M::WifiDirect, R::WithinWifiRange),
        Some(d) if ble && d <= BLE_RANGE_M => (M::Ble, R::WithinBleRange),
        Some(_) => (M::None, R::OutOfRange),
    };
    ChannelDecision { mode, reason }
}
