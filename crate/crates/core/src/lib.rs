//! Secure data-handover simulator for two-user downlink NOMA.
//!
//! The library models a base station that serves two users on the same
//! time-frequency resource via power-domain superposition coding. Payloads
//! are protected by a two-phase encryption scheme: an asymmetric layer
//! bound to each user's identity-derived elliptic-curve key pair, and a
//! symmetric layer keyed from the base station's private key that is shared
//! only with registered users. Public keys live in an append-only,
//! hash-chained registry with uniqueness enforcement.
//!
//! Modules:
//! - [`crypto`] — identity serialization, key derivation, curve constants,
//!   and the two encryption layers.
//! - [`ledger`] — the hash-chained public-key registry with tamper
//!   detection.
//! - [`phy`] — BPSK superposition, AWGN channel, SIC and direct receivers,
//!   and Monte-Carlo BER measurement.
//! - [`protocol`] — entity flows wiring crypto, ledger and PHY together,
//!   plus the legacy (unencrypted) baseline and the adversary suite.
//! - [`sim`] — configuration loading, scenario orchestration, and report
//!   emission backing the `noma-sim` CLI.

pub mod crypto;
pub mod ledger;
pub mod phy;
pub mod protocol;
pub mod sim;
