//! Power-domain NOMA baseband: BPSK modulation, two-user superposition,
//! AWGN channel, SIC and interference-as-noise receivers, and Monte-Carlo
//! BER measurement with closed-form reference curves.
//!
//! Real-valued BPSK with no pulse shaping and perfect synchronization; the
//! weak user gets the larger power share, so its symbol dominates the sign
//! of the composite and can be sliced directly, while the strong user
//! cancels the weak layer first.

mod ber;

pub use ber::{ber_monte_carlo, ber_point, BerReport, BerSweepConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhyError {
    #[error("invalid power allocation: {0}")]
    InvalidAllocation(String),
    #[error("length mismatch: weak {weak} vs strong {strong} symbols")]
    LengthMismatch { weak: usize, strong: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Power split between the two users; the weak user always gets the
/// strictly larger share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub total: f64,
    pub p_weak: f64,
    pub p_strong: f64,
}

/// Splits `total` as `p_weak = weak_fraction·total`,
/// `p_strong = (1-weak_fraction)·total`.
pub fn allocate_power(total: f64, weak_fraction: f64) -> Result<PowerAllocation, PhyError> {
    if !(total > 0.0) {
        return Err(PhyError::InvalidAllocation(format!(
            "total power must be positive, got {total}"
        )));
    }
    if !(weak_fraction > 0.5 && weak_fraction < 1.0) {
        return Err(PhyError::InvalidAllocation(format!(
            "weak_fraction must lie in (0.5, 1.0) so the weak user gets the larger share, got {weak_fraction}"
        )));
    }
    Ok(PowerAllocation {
        total,
        p_weak: weak_fraction * total,
        p_strong: (1.0 - weak_fraction) * total,
    })
}

/// Deterministic per-user gains plus the per-dimension noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h_strong: f64,
    pub h_weak: f64,
    pub noise_sigma: f64,
}

impl ChannelRealization {
    pub fn validate(&self) -> Result<(), PhyError> {
        if !(self.h_strong > self.h_weak && self.h_weak > 0.0) {
            return Err(PhyError::InvalidConfig(format!(
                "need h_strong > h_weak > 0, got h_strong={} h_weak={}",
                self.h_strong, self.h_weak
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(PhyError::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// The composite transmit signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperposedSignal {
    pub symbols: Vec<f64>,
}

impl SuperposedSignal {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// BPSK mapping: bit 0 → +1.0, bit 1 → −1.0.
pub fn modulate(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Hard BPSK slicer; exactly 0.0 decodes as bit 0 for determinism.
pub fn demodulate(symbols: &[f64]) -> Vec<u8> {
    symbols.iter().map(|&s| if s < 0.0 { 1 } else { 0 }).collect()
}

/// `symbol_k = √p_weak·weak_k + √p_strong·strong_k`.
pub fn superpose(
    sym_weak: &[f64],
    sym_strong: &[f64],
    alloc: &PowerAllocation,
) -> Result<SuperposedSignal, PhyError> {
    if sym_weak.len() != sym_strong.len() {
        return Err(PhyError::LengthMismatch {
            weak: sym_weak.len(),
            strong: sym_strong.len(),
        });
    }
    let aw = alloc.p_weak.sqrt();
    let as_ = alloc.p_strong.sqrt();
    let symbols = sym_weak
        .iter()
        .zip(sym_strong)
        .map(|(w, s)| aw * w + as_ * s)
        .collect();
    Ok(SuperposedSignal { symbols })
}

/// `y_k = gain·symbol_k + w_k`, `w_k ~ N(0, sigma²)`.
pub fn apply_channel(
    sig: &SuperposedSignal,
    gain: f64,
    noise_sigma: f64,
    rng: &mut impl rand::Rng,
) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    sig.symbols
        .iter()
        .map(|&s| {
            let w: f64 = StandardNormal.sample(rng);
            gain * s + noise_sigma * w
        })
        .collect()
}

/// SIC at the strong user: slice the dominant weak layer, reconstruct and
/// subtract it, then slice the residual. With `genie_weak_bits` the true
/// weak symbols are subtracted instead of the detected ones.
pub fn sic_decode_strong(
    y: &[f64],
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    genie_weak_bits: Option<&[u8]>,
) -> (Vec<u8>, Vec<u8>) {
    let aw = alloc.p_weak.sqrt();
    let mut weak_bits = Vec::with_capacity(y.len());
    let mut strong_bits = Vec::with_capacity(y.len());
    for (k, &yk) in y.iter().enumerate() {
        let detected: u8 = if yk < 0.0 { 1 } else { 0 };
        weak_bits.push(detected);
        let cancel_bit = match genie_weak_bits {
            Some(truth) => truth[k],
            None => detected,
        };
        let weak_symbol = if cancel_bit == 0 { 1.0 } else { -1.0 };
        let residual = yk - ch.h_strong * aw * weak_symbol;
        strong_bits.push(if residual < 0.0 { 1 } else { 0 });
    }
    (weak_bits, strong_bits)
}

/// Direct detection at the weak user, treating the strong layer as noise.
pub fn decode_weak_direct(
    y: &[f64],
    _alloc: &PowerAllocation,
    _ch: &ChannelRealization,
) -> Vec<u8> {
    demodulate(y)
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Closed-form BER of the genie-aided strong user:
/// `Q(h_strong·√p_strong / σ)`.
pub fn analytic_ber_strong_genie(alloc: &PowerAllocation, ch: &ChannelRealization) -> f64 {
    if ch.noise_sigma == 0.0 {
        return 0.0;
    }
    q_function(ch.h_strong * alloc.p_strong.sqrt() / ch.noise_sigma)
}

/// Exact composite-constellation BER of the weak user:
/// `½Q(h_weak(√p_weak−√p_strong)/σ) + ½Q(h_weak(√p_weak+√p_strong)/σ)`.
pub fn analytic_ber_weak(alloc: &PowerAllocation, ch: &ChannelRealization) -> f64 {
    if ch.noise_sigma == 0.0 {
        return 0.0;
    }
    let aw = alloc.p_weak.sqrt();
    let as_ = alloc.p_strong.sqrt();
    0.5 * q_function(ch.h_weak * (aw - as_) / ch.noise_sigma)
        + 0.5 * q_function(ch.h_weak * (aw + as_) / ch.noise_sigma)
}

/// Packs bits (MSB first) into bytes; the bit count must be a multiple of 8.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| chunk.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}

/// Unpacks bytes into bits, MSB first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for &byte in bytes {
        for i in (0..8).rev() {
            bits.push((byte >> i) & 1);
        }
    }
    bits
}
