//! Monte-Carlo BER measurement with deterministic, schedule-independent
//! trial streams.
//!
//! Every trial draws its randomness from a ChaCha stream keyed by the
//! master seed and selected by a counter built from the SNR-point index
//! and the trial index, so the accumulated integer error counts are
//! identical whether trials run sequentially or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    allocate_power, analytic_ber_strong_genie, analytic_ber_weak, apply_channel,
    decode_weak_direct, modulate, sic_decode_strong, superpose, ChannelRealization, PhyError,
    PowerAllocation, SuperposedSignal,
};

/// Settings for a BER sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerSweepConfig {
    pub snr_db: Vec<f64>,
    pub power_total: f64,
    pub weak_fraction: f64,
    pub h_strong: f64,
    pub h_weak: f64,
    /// Genie-aided cancellation at the strong user (matches the analytic
    /// reference exactly).
    pub genie_sic: bool,
    /// Stop a point once both users have at least this many bit errors.
    pub min_errors: u64,
    /// Hard cap on transmitted bits per user per point.
    pub max_bits: u64,
    /// Bits per user per Monte-Carlo trial.
    pub bits_per_trial: usize,
}

impl Default for BerSweepConfig {
    fn default() -> Self {
        BerSweepConfig {
            snr_db: vec![0.0, 4.0, 8.0],
            power_total: 1.0,
            weak_fraction: 0.8,
            h_strong: 1.0,
            h_weak: 0.6,
            genie_sic: false,
            min_errors: 100,
            max_bits: 5_000_000,
            bits_per_trial: 4096,
        }
    }
}

/// Measured and analytic error rates at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub snr_db: f64,
    pub trials: u64,
    pub bits_per_user: u64,
    pub bit_errors_strong: u64,
    pub bit_errors_weak: u64,
    pub ber_strong: f64,
    pub ber_weak: f64,
    pub analytic_strong: f64,
    pub analytic_weak: f64,
}

impl BerReport {
    /// Monte-Carlo standard error of a measured rate: `√(p(1-p)/N)`.
    pub fn standard_error(ber: f64, bits: u64) -> f64 {
        (ber * (1.0 - ber) / bits as f64).sqrt()
    }
}

/// SNR convention: `snr_db = 10·log10(power_total / σ²)` with σ the
/// per-dimension noise standard deviation.
pub fn sigma_for_snr_db(power_total: f64, snr_db: f64) -> f64 {
    (power_total * 10f64.powf(-snr_db / 10.0)).sqrt()
}

struct TrialOutcome {
    errors_strong: u64,
    errors_weak: u64,
}

fn run_trial(
    seed: u64,
    point_idx: usize,
    trial_idx: u64,
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    genie: bool,
    bits: usize,
) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point_idx as u64) << 40) | trial_idx);
    let mut weak_bits = vec![0u8; bits];
    let mut strong_bits = vec![0u8; bits];
    for b in weak_bits.iter_mut().chain(strong_bits.iter_mut()) {
        *b = (rand::Rng::gen::<u8>(&mut rng)) & 1;
    }
    let sig = superpose(&modulate(&weak_bits), &modulate(&strong_bits), alloc)
        .expect("equal lengths by construction");
    let y_strong = apply_channel(&sig, ch.h_strong, ch.noise_sigma, &mut rng);
    let genie_ref = genie.then_some(weak_bits.as_slice());
    let (_, detected_strong) = sic_decode_strong(&y_strong, alloc, ch, genie_ref);
    let y_weak = apply_channel(
        &SuperposedSignal {
            symbols: sig.symbols,
        },
        ch.h_weak,
        ch.noise_sigma,
        &mut rng,
    );
    let detected_weak = decode_weak_direct(&y_weak, alloc, ch);
    let errors_strong = detected_strong
        .iter()
        .zip(&strong_bits)
        .filter(|(a, b)| a != b)
        .count() as u64;
    let errors_weak = detected_weak
        .iter()
        .zip(&weak_bits)
        .filter(|(a, b)| a != b)
        .count() as u64;
    TrialOutcome {
        errors_strong,
        errors_weak,
    }
}

fn run_batch(
    seed: u64,
    point_idx: usize,
    first_trial: u64,
    count: u64,
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    genie: bool,
    bits: usize,
) -> (u64, u64) {
    let fold = |acc: (u64, u64), t: TrialOutcome| (acc.0 + t.errors_strong, acc.1 + t.errors_weak);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (first_trial..first_trial + count)
            .into_par_iter()
            .map(|t| run_trial(seed, point_idx, t, alloc, ch, genie, bits))
            .fold(|| (0u64, 0u64), fold)
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    }
    #[cfg(not(feature = "parallel"))]
    {
        (first_trial..first_trial + count)
            .map(|t| run_trial(seed, point_idx, t, alloc, ch, genie, bits))
            .fold((0u64, 0u64), fold)
    }
}

/// Measures one SNR point, accumulating trials until both users have at
/// least `min_errors` errors or `max_bits` bits have been sent.
pub fn ber_point(
    cfg: &BerSweepConfig,
    point_idx: usize,
    seed: u64,
) -> Result<BerReport, PhyError> {
    let alloc = allocate_power(cfg.power_total, cfg.weak_fraction)?;
    let snr_db = *cfg
        .snr_db
        .get(point_idx)
        .ok_or_else(|| PhyError::InvalidConfig(format!("no SNR point {point_idx}")))?;
    let ch = ChannelRealization {
        h_strong: cfg.h_strong,
        h_weak: cfg.h_weak,
        noise_sigma: sigma_for_snr_db(cfg.power_total, snr_db),
    };
    ch.validate()?;
    if cfg.bits_per_trial == 0 {
        return Err(PhyError::InvalidConfig("bits_per_trial must be >= 1".into()));
    }

    const BATCH_TRIALS: u64 = 32;
    let mut trials = 0u64;
    let mut errors_strong = 0u64;
    let mut errors_weak = 0u64;
    loop {
        let bits_so_far = trials * cfg.bits_per_trial as u64;
        let enough_errors = errors_strong >= cfg.min_errors && errors_weak >= cfg.min_errors;
        if (enough_errors && trials > 0) || bits_so_far >= cfg.max_bits {
            break;
        }
        let (es, ew) = run_batch(
            seed,
            point_idx,
            trials,
            BATCH_TRIALS,
            &alloc,
            &ch,
            cfg.genie_sic,
            cfg.bits_per_trial,
        );
        errors_strong += es;
        errors_weak += ew;
        trials += BATCH_TRIALS;
    }
    let bits_per_user = trials * cfg.bits_per_trial as u64;
    Ok(BerReport {
        snr_db,
        trials,
        bits_per_user,
        bit_errors_strong: errors_strong,
        bit_errors_weak: errors_weak,
        ber_strong: errors_strong as f64 / bits_per_user as f64,
        ber_weak: errors_weak as f64 / bits_per_user as f64,
        analytic_strong: analytic_ber_strong_genie(&alloc, &ch),
        analytic_weak: analytic_ber_weak(&alloc, &ch),
    })
}

/// Runs the full sweep; identical seed gives identical reports regardless
/// of scheduling.
pub fn ber_monte_carlo(cfg: &BerSweepConfig, seed: u64) -> Result<Vec<BerReport>, PhyError> {
    if cfg.snr_db.is_empty() {
        return Err(PhyError::InvalidConfig("empty SNR sweep".into()));
    }
    if cfg.min_errors == 0 {
        return Err(PhyError::InvalidConfig("min_errors must be >= 1".into()));
    }
    (0..cfg.snr_db.len())
        .map(|i| ber_point(cfg, i, seed))
        .collect()
}
