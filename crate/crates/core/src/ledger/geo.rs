use serde::{Deserialize, Serialize};

use crate::ibsc::MicroDegrees;

/// WGS-84 mean earth radius, metres.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub lat: MicroDegrees,
    pub lon: MicroDegrees,
}

impl Location {
    pub fn new(lat: MicroDegrees, lon: MicroDegrees) -> Self {
        Location { lat, lon }
    }

    pub fn from_degrees(lat: f64, lon: f64) -> Self {
        Location::new(MicroDegrees::from_degrees(lat), MicroDegrees::from_degrees(lon))
    }

    pub fn is_valid(&self) -> bool {
        self.lat.0.abs() <= 90_000_000 && self.lon.0.abs() <= 180_000_000
    }

    /// Great-circle distance in metres.
    pub fn distance_m(&self, other: &Location) -> f64 {
        haversine_m(
            self.lat.degrees(),
            self.lon.degrees(),
            other.lat.degrees(),
            other.lon.degrees(),
        )
    }
}

pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().atan2((1.0 - a).sqrt())
}
