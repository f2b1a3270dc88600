//! The two encryption layers.
//!
//! Layer 1 encrypts to a user's public key: ephemeral ECDH on secp256k1,
//! SHA-256 of the shared x-coordinate as the AES-256-GCM key. Layer 2 is
//! symmetric AES-256-GCM under a key derived from the base station's
//! private key, which acts as the group key shared with registered users.
//!
//! Wire formats:
//! - Layer 1: `ephemeral_pk (33) ‖ nonce (12) ‖ body ‖ tag (16)`
//! - Layer 2: `nonce (12) ‖ body ‖ tag (16)`

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::RngCore;
use sha2::{Digest, Sha256};

use super::keys::{KeyRole, PrivateKey, PublicKey};
use super::CryptoError;

pub const NONCE_BYTES: usize = 12;
pub const TAG_BYTES: usize = 16;
pub const POINT_BYTES: usize = 33;

/// Fixed wire overhead of a layer-1 ciphertext over its plaintext.
pub const LAYER1_OVERHEAD: usize = POINT_BYTES + NONCE_BYTES + TAG_BYTES;
/// Fixed wire overhead of a layer-2 ciphertext over its plaintext.
pub const LAYER2_OVERHEAD: usize = NONCE_BYTES + TAG_BYTES;

/// Asymmetric-layer ciphertext: an ephemeral public point plus an AEAD
/// envelope bound to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer1Ciphertext {
    pub ephemeral_pk: [u8; POINT_BYTES],
    pub nonce: [u8; NONCE_BYTES],
    pub body: Vec<u8>,
    pub auth_tag: [u8; TAG_BYTES],
}

impl Layer1Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(LAYER1_OVERHEAD + self.body.len());
        out.extend_from_slice(&self.ephemeral_pk);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.body);
        out.extend_from_slice(&self.auth_tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < LAYER1_OVERHEAD {
            return Err(CryptoError::MalformedCiphertext("layer-1 frame too short"));
        }
        let body_len = bytes.len() - LAYER1_OVERHEAD;
        Ok(Layer1Ciphertext {
            ephemeral_pk: bytes[..POINT_BYTES].try_into().unwrap(),
            nonce: bytes[POINT_BYTES..POINT_BYTES + NONCE_BYTES].try_into().unwrap(),
            body: bytes[POINT_BYTES + NONCE_BYTES..POINT_BYTES + NONCE_BYTES + body_len].to_vec(),
            auth_tag: bytes[bytes.len() - TAG_BYTES..].try_into().unwrap(),
        })
    }
}

/// Symmetric-layer ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer2Ciphertext {
    pub nonce: [u8; NONCE_BYTES],
    pub body: Vec<u8>,
    pub auth_tag: [u8; TAG_BYTES],
}

impl Layer2Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(LAYER2_OVERHEAD + self.body.len());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.body);
        out.extend_from_slice(&self.auth_tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < LAYER2_OVERHEAD {
            return Err(CryptoError::MalformedCiphertext("layer-2 frame too short"));
        }
        let body_len = bytes.len() - LAYER2_OVERHEAD;
        Ok(Layer2Ciphertext {
            nonce: bytes[..NONCE_BYTES].try_into().unwrap(),
            body: bytes[NONCE_BYTES..NONCE_BYTES + body_len].to_vec(),
            auth_tag: bytes[bytes.len() - TAG_BYTES..].try_into().unwrap(),
        })
    }
}

fn aead_seal(key: &[u8; 32], nonce: &[u8; NONCE_BYTES], plaintext: &[u8]) -> (Vec<u8>, [u8; TAG_BYTES]) {
    let cipher = Aes256Gcm::new(key.into());
    let mut sealed = cipher
        .encrypt(Nonce::from_slice(nonce), Payload::from(plaintext))
        .expect("AES-GCM encryption is infallible for in-memory buffers");
    let tag: [u8; TAG_BYTES] = sealed[sealed.len() - TAG_BYTES..].try_into().unwrap();
    sealed.truncate(sealed.len() - TAG_BYTES);
    (sealed, tag)
}

fn aead_open(
    key: &[u8; 32],
    nonce: &[u8; NONCE_BYTES],
    body: &[u8],
    tag: &[u8; TAG_BYTES],
) -> Result<Vec<u8>, CryptoError> {
    let cipher = Aes256Gcm::new(key.into());
    let mut sealed = Vec::with_capacity(body.len() + TAG_BYTES);
    sealed.extend_from_slice(body);
    sealed.extend_from_slice(tag);
    cipher
        .decrypt(Nonce::from_slice(nonce), Payload::from(sealed.as_slice()))
        .map_err(|_| CryptoError::AuthFailure)
}

/// ECDH shared key: SHA-256 of the x-coordinate of `scalar · point`.
fn shared_key(scalar: &k256::Scalar, point: &k256::ProjectivePoint) -> [u8; 32] {
    use k256::elliptic_curve::sec1::ToEncodedPoint;
    let shared = (*point * scalar).to_affine();
    let enc = shared.to_encoded_point(false);
    let x = enc.x().expect("shared point is never at infinity");
    Sha256::digest(x).into()
}

/// Encrypts to a public key (ephemeral ECDH + AES-256-GCM).
pub fn encrypt_layer1(
    pk: &PublicKey,
    plaintext: &[u8],
    rng: &mut impl RngCore,
) -> Layer1Ciphertext {
    let ephemeral = PrivateKey::from_entropy(rng, KeyRole::Ue);
    let ephemeral_point = k256::ProjectivePoint::GENERATOR * ephemeral.scalar();
    let ephemeral_pk: [u8; POINT_BYTES] = {
        use k256::elliptic_curve::sec1::ToEncodedPoint;
        ephemeral_point
            .to_affine()
            .to_encoded_point(true)
            .as_bytes()
            .try_into()
            .unwrap()
    };
    let key = shared_key(ephemeral.scalar(), &pk.to_projective());
    let mut nonce = [0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let (body, auth_tag) = aead_seal(&key, &nonce, plaintext);
    Layer1Ciphertext {
        ephemeral_pk,
        nonce,
        body,
        auth_tag,
    }
}

/// Decrypts a layer-1 ciphertext with the recipient's private key.
pub fn decrypt_layer1(pr: &PrivateKey, ct: &Layer1Ciphertext) -> Result<Vec<u8>, CryptoError> {
    let ephemeral = PublicKey::from_compressed(&ct.ephemeral_pk)
        .map_err(|_| CryptoError::MalformedCiphertext("invalid ephemeral point"))?;
    let key = shared_key(pr.scalar(), &ephemeral.to_projective());
    aead_open(&key, &ct.nonce, &ct.body, &ct.auth_tag)
}

/// Layer-2 AEAD key: `SHA-256("layer2" ‖ scalar as 32 BE bytes)`.
fn layer2_key(pr_b: &PrivateKey) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"layer2");
    hasher.update(pr_b.to_bytes());
    hasher.finalize().into()
}

/// Symmetric encryption under the base station's private key.
pub fn encrypt_layer2(
    pr_b: &PrivateKey,
    wrapped: &[u8],
    rng: &mut impl RngCore,
) -> Layer2Ciphertext {
    let key = layer2_key(pr_b);
    let mut nonce = [0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let (body, auth_tag) = aead_seal(&key, &nonce, wrapped);
    Layer2Ciphertext {
        nonce,
        body,
        auth_tag,
    }
}

/// Inverse of [`encrypt_layer2`]; fails with `AuthFailure` under any other
/// key or after tampering.
pub fn decrypt_layer2(pr_b: &PrivateKey, ct: &Layer2Ciphertext) -> Result<Vec<u8>, CryptoError> {
    let key = layer2_key(pr_b);
    aead_open(&key, &ct.nonce, &ct.body, &ct.auth_tag)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::curve::CurveParams;
    use super::super::keys::{derive_public_key, KeyRole, PrivateKey};
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn keypair(seed: u64) -> (PrivateKey, PublicKey) {
        let mut r = rng(seed);
        let pr = PrivateKey::from_entropy(&mut r, KeyRole::Ue);
        let pk = derive_public_key(&pr, &CurveParams::secp256k1()).unwrap();
        (pr, pk)
    }

    #[test]
    fn layer1_roundtrip_random_messages() {
        let (pr, pk) = keypair(1);
        let mut r = rng(2);
        for i in 0..100usize {
            let mut msg = vec![0u8; i * 7 % 256];
            r.fill_bytes(&mut msg);
            let ct = encrypt_layer1(&pk, &msg, &mut r);
            assert_eq!(decrypt_layer1(&pr, &ct).unwrap(), msg);
        }
    }

    #[test]
    fn layer1_empty_plaintext() {
        let (pr, pk) = keypair(3);
        let mut r = rng(4);
        let ct = encrypt_layer1(&pk, b"", &mut r);
        assert!(ct.body.is_empty());
        assert_eq!(ct.to_bytes().len(), LAYER1_OVERHEAD);
        assert_eq!(decrypt_layer1(&pr, &ct).unwrap(), b"");
    }

    #[test]
    fn layer1_encryption_is_probabilistic() {
        let (_, pk) = keypair(5);
        let mut r = rng(6);
        let a = encrypt_layer1(&pk, b"same message", &mut r);
        let b = encrypt_layer1(&pk, b"same message", &mut r);
        assert_ne!(a.ephemeral_pk, b.ephemeral_pk);
        assert_ne!(a.nonce, b.nonce);
        assert_ne!(a.body, b.body);
    }

    #[test]
    fn layer1_wrong_key_fails_every_trial() {
        let (_, pk2) = keypair(7);
        let (pr1, _) = keypair(8);
        let mut r = rng(9);
        for _ in 0..100 {
            let ct = encrypt_layer1(&pk2, b"for ue2 only", &mut r);
            assert_eq!(decrypt_layer1(&pr1, &ct), Err(CryptoError::AuthFailure));
        }
    }

    #[test]
    fn layer1_bit_flip_detected() {
        let (pr, pk) = keypair(10);
        let mut r = rng(11);
        let mut ct = encrypt_layer1(&pk, b"integrity", &mut r);
        ct.body[0] ^= 0x01;
        assert_eq!(decrypt_layer1(&pr, &ct), Err(CryptoError::AuthFailure));
    }

    #[test]
    fn layer1_invalid_ephemeral_point() {
        let (pr, pk) = keypair(12);
        let mut r = rng(13);
        let mut ct = encrypt_layer1(&pk, b"x", &mut r);
        ct.ephemeral_pk = [0xffu8; POINT_BYTES];
        assert!(matches!(
            decrypt_layer1(&pr, &ct),
            Err(CryptoError::MalformedCiphertext(_))
        ));
    }

    #[test]
    fn layer2_roundtrip_and_wrong_key() {
        let mut r = rng(14);
        let bs = PrivateKey::from_entropy(&mut r, KeyRole::BaseStation);
        let other = PrivateKey::from_entropy(&mut r, KeyRole::BaseStation);
        let ct = encrypt_layer2(&bs, b"wrapped payload", &mut r);
        assert_eq!(decrypt_layer2(&bs, &ct).unwrap(), b"wrapped payload");
        assert_eq!(decrypt_layer2(&other, &ct), Err(CryptoError::AuthFailure));
    }

    #[test]
    fn layer2_fresh_nonces() {
        let mut r = rng(15);
        let bs = PrivateKey::from_entropy(&mut r, KeyRole::BaseStation);
        let a = encrypt_layer2(&bs, b"w", &mut r);
        let b = encrypt_layer2(&bs, b"w", &mut r);
        assert_ne!(a.nonce, b.nonce);
        assert_ne!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn layer2_truncated_frame() {
        assert!(matches!(
            Layer2Ciphertext::from_bytes(&[0u8; LAYER2_OVERHEAD - 1]),
            Err(CryptoError::MalformedCiphertext(_))
        ));
    }

    #[test]
    fn wire_roundtrip() {
        let (_, pk) = keypair(16);
        let mut r = rng(17);
        let ct = encrypt_layer1(&pk, b"wire", &mut r);
        assert_eq!(Layer1Ciphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);
        let bs = PrivateKey::from_entropy(&mut r, KeyRole::BaseStation);
        let ct2 = encrypt_layer2(&bs, b"wire2", &mut r);
        assert_eq!(Layer2Ciphertext::from_bytes(&ct2.to_bytes()).unwrap(), ct2);
    }
}
