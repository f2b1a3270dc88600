//! Device identity and its canonical byte serialization.

use serde::{Deserialize, Serialize};

use super::CryptoError;

/// Length of the canonical identity serialization.
pub const IDENTITY_BYTES: usize = 45;

/// The five inputs to key derivation: IMEI, MAC address, timestamp, and
/// fixed-point location.
///
/// Latitude and longitude are stored as signed micro-degrees so that the
/// hash input is bit-exact across platforms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceIdentity {
    /// 15 ASCII decimal digits.
    pub imei: String,
    /// 6-byte hardware address.
    pub mac: [u8; 6],
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    /// Micro-degrees latitude, in [-90e6, +90e6].
    pub lat_udeg: i64,
    /// Micro-degrees longitude, in [-180e6, +180e6].
    pub lon_udeg: i64,
}

impl DeviceIdentity {
    /// Checks all field invariants.
    pub fn validate(&self) -> Result<(), CryptoError> {
        if self.imei.len() != 15 || !self.imei.bytes().all(|b| b.is_ascii_digit()) {
            return Err(CryptoError::MalformedIdentity(format!(
                "imei must be exactly 15 ASCII digits, got {:?}",
                self.imei
            )));
        }
        if self.lat_udeg.abs() > 90_000_000 {
            return Err(CryptoError::MalformedIdentity(format!(
                "lat_udeg {} outside [-90000000, 90000000]",
                self.lat_udeg
            )));
        }
        if self.lon_udeg.abs() > 180_000_000 {
            return Err(CryptoError::MalformedIdentity(format!(
                "lon_udeg {} outside [-180000000, 180000000]",
                self.lon_udeg
            )));
        }
        Ok(())
    }
}

/// Canonical 45-byte layout hashed for key derivation:
/// `imei (15) ‖ mac (6) ‖ timestamp_ms (8, BE) ‖ lat_udeg (8, BE) ‖ lon_udeg (8, BE)`.
pub fn serialize_identity(id: &DeviceIdentity) -> Result<[u8; IDENTITY_BYTES], CryptoError> {
    id.validate()?;
    let mut out = [0u8; IDENTITY_BYTES];
    out[0..15].copy_from_slice(id.imei.as_bytes());
    out[15..21].copy_from_slice(&id.mac);
    out[21..29].copy_from_slice(&id.timestamp_ms.to_be_bytes());
    out[29..37].copy_from_slice(&id.lat_udeg.to_be_bytes());
    out[37..45].copy_from_slice(&id.lon_udeg.to_be_bytes());
    Ok(out)
}
