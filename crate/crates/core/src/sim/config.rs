//! Scenario configuration: strict TOML with defaults, validated against
//! every module invariant before any simulation starts.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::DeviceIdentity;
use crate::phy::{allocate_power, BerSweepConfig, ChannelRealization};

use super::SimError;

/// Which handover scheme a scenario exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Secure,
    Legacy,
}

/// What a UE's payload is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum PayloadSpec {
    Text { text: String },
    Hex { hex: String },
    Random { random_bytes: usize },
}

/// One UE's identity and payload as configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    pub ue_id: String,
    pub imei: String,
    /// Colon-separated hex, e.g. "00:11:22:33:44:55".
    pub mac: String,
    pub timestamp_ms: u64,
    pub lat_udeg: i64,
    pub lon_udeg: i64,
    pub payload: PayloadSpec,
}

impl UeConfig {
    pub fn identity(&self) -> Result<DeviceIdentity, SimError> {
        let id = DeviceIdentity {
            imei: self.imei.clone(),
            mac: parse_mac(&self.mac)
                .ok_or_else(|| SimError::Validation(format!("ue {:?}: bad mac {:?}", self.ue_id, self.mac)))?,
            timestamp_ms: self.timestamp_ms,
            lat_udeg: self.lat_udeg,
            lon_udeg: self.lon_udeg,
        };
        id.validate()
            .map_err(|e| SimError::Validation(format!("ue {:?}: {e}", self.ue_id)))?;
        Ok(id)
    }
}

fn parse_mac(s: &str) -> Option<[u8; 6]> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 6 {
        return None;
    }
    let mut mac = [0u8; 6];
    for (i, part) in parts.iter().enumerate() {
        mac[i] = u8::from_str_radix(part, 16).ok()?;
    }
    Some(mac)
}

fn default_num_ues() -> usize {
    2
}
fn default_power_total() -> f64 {
    1.0
}
fn default_weak_fraction() -> f64 {
    0.8
}
fn default_h_strong() -> f64 {
    1.0
}
fn default_h_weak() -> f64 {
    0.6
}
fn default_scheme() -> Scheme {
    Scheme::Secure
}
fn default_min_errors() -> u64 {
    100
}
fn default_max_bits() -> u64 {
    5_000_000
}
fn default_bits_per_trial() -> usize {
    4096
}
fn default_registered_at_ms() -> u64 {
    1_700_000_000_000
}

/// Full scenario description. Unknown keys are rejected to catch typos;
/// the seed is mandatory (no implicit entropy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_num_ues")]
    pub num_ues: usize,
    #[serde(default = "default_power_total")]
    pub power_total: f64,
    #[serde(default = "default_weak_fraction")]
    pub weak_fraction: f64,
    #[serde(default = "default_h_strong")]
    pub h_strong: f64,
    #[serde(default = "default_h_weak")]
    pub h_weak: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    /// SNR points for `ber` sweeps.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub genie_sic: bool,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
    #[serde(default = "default_bits_per_trial")]
    pub bits_per_trial: usize,
    #[serde(default = "default_registered_at_ms")]
    pub registered_at_ms: u64,
    pub ues: Vec<UeConfig>,
}

impl ScenarioConfig {
    /// Parses and validates; no simulation side effects happen on
    /// rejection.
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_ues != 2 {
            return Err(SimError::Validation(format!(
                "num_ues must be 2 (two-user superposition), got {}",
                self.num_ues
            )));
        }
        if self.ues.len() != self.num_ues {
            return Err(SimError::Validation(format!(
                "expected {} [[ues]] entries, got {}",
                self.num_ues,
                self.ues.len()
            )));
        }
        for (i, a) in self.ues.iter().enumerate() {
            for b in &self.ues[i + 1..] {
                if a.ue_id == b.ue_id {
                    return Err(SimError::Validation(format!(
                        "duplicate ue_id {:?}",
                        a.ue_id
                    )));
                }
            }
        }
        allocate_power(self.power_total, self.weak_fraction)
            .map_err(|e| SimError::Validation(e.to_string()))?;
        self.channel()
            .validate()
            .map_err(|e| SimError::Validation(e.to_string()))?;
        for ue in &self.ues {
            ue.identity()?;
        }
        Ok(())
    }

    pub fn channel(&self) -> ChannelRealization {
        ChannelRealization {
            h_strong: self.h_strong,
            h_weak: self.h_weak,
            noise_sigma: self.noise_sigma,
        }
    }

    pub fn ber_config(&self) -> BerSweepConfig {
        BerSweepConfig {
            snr_db: self.snr_db.clone(),
            power_total: self.power_total,
            weak_fraction: self.weak_fraction,
            h_strong: self.h_strong,
            h_weak: self.h_weak,
            genie_sic: self.genie_sic,
            min_errors: self.min_errors,
            max_bits: self.max_bits,
            bits_per_trial: self.bits_per_trial,
        }
    }

    /// Resolves each UE's payload bytes; random payloads draw from a
    /// per-UE stream of the scenario seed.
    pub fn resolve_payloads(&self) -> Result<Vec<(String, Vec<u8>)>, SimError> {
        self.ues
            .iter()
            .enumerate()
            .map(|(i, ue)| {
                let bytes = match &ue.payload {
                    PayloadSpec::Text { text } => text.clone().into_bytes(),
                    PayloadSpec::Hex { hex } => hex::decode(hex).map_err(|e| {
                        SimError::Validation(format!("ue {:?}: bad payload hex: {e}", ue.ue_id))
                    })?,
                    PayloadSpec::Random { random_bytes } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                        rng.set_stream(0x7061_796c_6f61_6400 | i as u64);
                        (0..*random_bytes).map(|_| rng.gen()).collect()
                    }
                };
                Ok((ue.ue_id.clone(), bytes))
            })
            .collect()
    }
}
