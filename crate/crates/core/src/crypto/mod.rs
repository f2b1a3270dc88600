//! Identity-based key generation, curve constants, and the two encryption
//! layers of the handover scheme.
//!
//! A device's private key is a deterministic function of its identity
//! (IMEI, MAC, timestamp, location): the canonical 45-byte serialization is
//! hashed with SHA-256 and reduced into the scalar range of secp256k1. The
//! public key is the scalar multiple of the generator. Layer 1 encrypts a
//! payload to a user's public key (ephemeral ECDH, SHA-256 KDF,
//! AES-256-GCM); layer 2 encrypts the layer-1 ciphertext under a symmetric
//! key derived from the base station's private key.

mod cipher;
mod curve;
mod identity;
mod kbox;
mod keys;

pub use cipher::{
    decrypt_layer1, decrypt_layer2, encrypt_layer1, encrypt_layer2, Layer1Ciphertext,
    Layer2Ciphertext, LAYER1_OVERHEAD, LAYER2_OVERHEAD,
};
pub use curve::{AffinePoint, CurveParams};
pub use identity::{serialize_identity, DeviceIdentity, IDENTITY_BYTES};
pub use kbox::KBox;
pub use keys::{derive_private_key, derive_public_key, KeyRole, PrivateKey, PublicKey};

use thiserror::Error;

/// Errors raised by key derivation and the two encryption layers.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed identity: {0}")]
    MalformedIdentity(String),
    #[error("private key scalar outside [1, n-1]")]
    InvalidScalar,
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(&'static str),
    #[error("authentication failure: wrong key or tampered ciphertext")]
    AuthFailure,
    #[error("malformed key material: {0}")]
    MalformedKey(String),
}
