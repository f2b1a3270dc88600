//! The blockchain-based identity management server (BIMS): an append-only,
//! hash-chained registry of UE public keys.
//!
//! Each block commits to its predecessor's hash, so modifying any stored
//! record invalidates every later hash. Uniqueness of both public keys and
//! UE ids is enforced at append time. There is a single logical writer and
//! no consensus protocol; the chain is used purely as a tamper-evident key
//! store.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::crypto::PublicKey;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("public key already registered (block {0})")]
    DuplicateKey(u64),
    #[error("ue id {0:?} already registered")]
    DuplicateId(String),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("ue id {0:?} not registered")]
    NotFound(String),
    #[error("ledger file corrupt: {0}")]
    CorruptFile(String),
}

/// One public-key registration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub ue_id: String,
    /// Compressed SEC1 point, 33 bytes.
    #[serde(with = "hex_bytes")]
    pub public_key: Vec<u8>,
    pub registered_at_ms: u64,
}

impl RegistrationRecord {
    /// Canonical bytes hashed into the block:
    /// `ue_id len (2 BE) ‖ ue_id ‖ public_key (33) ‖ registered_at_ms (8 BE)`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + self.ue_id.len() + self.public_key.len() + 8);
        out.extend_from_slice(&(self.ue_id.len() as u16).to_be_bytes());
        out.extend_from_slice(self.ue_id.as_bytes());
        out.extend_from_slice(&self.public_key);
        out.extend_from_slice(&self.registered_at_ms.to_be_bytes());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    #[serde(with = "hex_bytes32")]
    pub prev_hash: [u8; 32],
    pub payload: RegistrationRecord,
    #[serde(with = "hex_bytes32")]
    pub block_hash: [u8; 32],
}

/// `SHA-256(index BE8 ‖ prev_hash ‖ registered_at_ms BE8 ‖ SHA-256(payload))`.
fn compute_block_hash(index: u64, prev_hash: &[u8; 32], payload: &RegistrationRecord) -> [u8; 32] {
    let payload_hash: [u8; 32] = Sha256::digest(payload.canonical_bytes()).into();
    let mut hasher = Sha256::new();
    hasher.update(index.to_be_bytes());
    hasher.update(prev_hash);
    hasher.update(payload.registered_at_ms.to_be_bytes());
    hasher.update(payload_hash);
    hasher.finalize().into()
}

/// Verdict of [`IdentityLedger::verify_chain`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ChainVerdict {
    Valid,
    Invalid { index: u64, reason: String },
}

impl ChainVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainVerdict::Valid)
    }
}

/// Append-only hash chain starting at a fixed genesis block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityLedger {
    blocks: Vec<Block>,
}

impl Default for IdentityLedger {
    fn default() -> Self {
        Self::init()
    }
}

impl IdentityLedger {
    /// A fresh ledger holding only the genesis block (all-zero prev_hash,
    /// empty sentinel payload).
    pub fn init() -> Self {
        let sentinel = RegistrationRecord {
            ue_id: String::new(),
            public_key: vec![0u8; 33],
            registered_at_ms: 0,
        };
        let block_hash = compute_block_hash(0, &[0u8; 32], &sentinel);
        IdentityLedger {
            blocks: vec![Block {
                index: 0,
                prev_hash: [0u8; 32],
                payload: sentinel,
                block_hash,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Appends a registration, enforcing key and id uniqueness.
    pub fn register_public_key(&mut self, rec: RegistrationRecord) -> Result<&Block, LedgerError> {
        if rec.ue_id.is_empty() {
            return Err(LedgerError::MalformedRecord("empty ue_id".into()));
        }
        PublicKey::from_compressed(&rec.public_key)
            .map_err(|e| LedgerError::MalformedRecord(e.to_string()))?;
        for block in self.blocks.iter().skip(1) {
            if block.payload.public_key == rec.public_key {
                return Err(LedgerError::DuplicateKey(block.index));
            }
            if block.payload.ue_id == rec.ue_id {
                return Err(LedgerError::DuplicateId(rec.ue_id));
            }
        }
        let tip = self.blocks.last().expect("ledger always has genesis");
        let index = tip.index + 1;
        let prev_hash = tip.block_hash;
        let block_hash = compute_block_hash(index, &prev_hash, &rec);
        self.blocks.push(Block {
            index,
            prev_hash,
            payload: rec,
            block_hash,
        });
        Ok(self.blocks.last().unwrap())
    }

    /// Returns the registered public key for a UE id.
    pub fn lookup_public_key(&self, ue_id: &str) -> Result<PublicKey, LedgerError> {
        self.blocks
            .iter()
            .skip(1)
            .find(|b| b.payload.ue_id == ue_id)
            .map(|b| PublicKey::from_compressed(&b.payload.public_key).expect("validated at append"))
            .ok_or_else(|| LedgerError::NotFound(ue_id.to_string()))
    }

    /// Recomputes every hash and link; reports the first offending index.
    pub fn verify_chain(&self) -> ChainVerdict {
        let mut seen_keys: Vec<&[u8]> = Vec::new();
        let mut seen_ids: Vec<&str> = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            if block.index != i as u64 {
                return ChainVerdict::Invalid {
                    index: block.index,
                    reason: format!("index {} at position {i}", block.index),
                };
            }
            let expected_prev = if i == 0 {
                [0u8; 32]
            } else {
                self.blocks[i - 1].block_hash
            };
            if block.prev_hash != expected_prev {
                return ChainVerdict::Invalid {
                    index: block.index,
                    reason: "prev_hash does not link to predecessor".into(),
                };
            }
            let recomputed = compute_block_hash(block.index, &block.prev_hash, &block.payload);
            if block.block_hash != recomputed {
                return ChainVerdict::Invalid {
                    index: block.index,
                    reason: "block hash does not recompute".into(),
                };
            }
            if i > 0 {
                if seen_keys.contains(&block.payload.public_key.as_slice()) {
                    return ChainVerdict::Invalid {
                        index: block.index,
                        reason: "duplicate public key".into(),
                    };
                }
                if seen_ids.contains(&block.payload.ue_id.as_str()) {
                    return ChainVerdict::Invalid {
                        index: block.index,
                        reason: "duplicate ue id".into(),
                    };
                }
                seen_keys.push(&block.payload.public_key);
                seen_ids.push(&block.payload.ue_id);
            }
        }
        ChainVerdict::Valid
    }

    /// One JSON object per line, hashes hex-encoded.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            out.push_str(&serde_json::to_string(block).expect("block serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses the line-per-block file format. Does not verify the chain;
    /// callers decide whether a tampered file is an error or a finding.
    pub fn from_file_string(text: &str) -> Result<Self, LedgerError> {
        let mut blocks = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let block: Block = serde_json::from_str(line)
                .map_err(|e| LedgerError::CorruptFile(format!("line {}: {e}", lineno + 1)))?;
            blocks.push(block);
        }
        if blocks.is_empty() {
            return Err(LedgerError::CorruptFile("no blocks".into()));
        }
        Ok(IdentityLedger { blocks })
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

mod hex_bytes32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom("hash must be 32 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::crypto::{derive_public_key, CurveParams, KeyRole, PrivateKey};

    use super::*;

    fn record(seed: u64, ue_id: &str) -> RegistrationRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pr = PrivateKey::from_entropy(&mut rng, KeyRole::Ue);
        let pk = derive_public_key(&pr, &CurveParams::secp256k1()).unwrap();
        RegistrationRecord {
            ue_id: ue_id.to_string(),
            public_key: pk.to_compressed().to_vec(),
            registered_at_ms: 1_700_000_000_000 + seed,
        }
    }

    #[test]
    fn genesis_shape() {
        let ledger = IdentityLedger::init();
        assert_eq!(ledger.len(), 1);
        assert_eq!(ledger.blocks()[0].prev_hash, [0u8; 32]);
        assert!(ledger.verify_chain().is_valid());
        assert_eq!(
            ledger.lookup_public_key("UE1"),
            Err(LedgerError::NotFound("UE1".into()))
        );
    }

    #[test]
    fn chain_links_and_lookup() {
        let mut ledger = IdentityLedger::init();
        let genesis_hash = ledger.blocks()[0].block_hash;
        let block = ledger.register_public_key(record(1, "UE1")).unwrap();
        assert_eq!(block.index, 1);
        assert_eq!(block.prev_hash, genesis_hash);
        ledger.register_public_key(record(2, "UE2")).unwrap();
        assert_eq!(ledger.len(), 3);
        assert!(ledger.verify_chain().is_valid());
        let pk1 = ledger.lookup_public_key("UE1").unwrap();
        let pk2 = ledger.lookup_public_key("UE2").unwrap();
        assert_ne!(pk1, pk2);
    }

    #[test]
    fn duplicate_key_rejected() {
        let mut ledger = IdentityLedger::init();
        ledger.register_public_key(record(1, "UE1")).unwrap();
        let mut dup = record(1, "UE9");
        dup.registered_at_ms += 5;
        assert_eq!(
            ledger.register_public_key(dup),
            Err(LedgerError::DuplicateKey(1))
        );
        assert_eq!(ledger.len(), 2);
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut ledger = IdentityLedger::init();
        ledger.register_public_key(record(1, "UE1")).unwrap();
        assert_eq!(
            ledger.register_public_key(record(2, "UE1")),
            Err(LedgerError::DuplicateId("UE1".into()))
        );
    }

    #[test]
    fn invalid_point_rejected() {
        let mut ledger = IdentityLedger::init();
        let mut rec = record(1, "UE1");
        rec.public_key = vec![0xffu8; 33];
        assert!(matches!(
            ledger.register_public_key(rec),
            Err(LedgerError::MalformedRecord(_))
        ));
    }

    #[test]
    fn payload_tamper_detected_at_index() {
        let mut ledger = IdentityLedger::init();
        for i in 1..=5u64 {
            ledger.register_public_key(record(i, &format!("UE{i}"))).unwrap();
        }
        ledger.blocks[3].payload.registered_at_ms ^= 1;
        assert_eq!(
            ledger.verify_chain(),
            ChainVerdict::Invalid {
                index: 3,
                reason: "block hash does not recompute".into()
            }
        );
    }

    #[test]
    fn prev_hash_tamper_detected() {
        let mut ledger = IdentityLedger::init();
        for i in 1..=5u64 {
            ledger.register_public_key(record(i, &format!("UE{i}"))).unwrap();
        }
        ledger.blocks[5].prev_hash[0] ^= 0x80;
        assert_eq!(
            ledger.verify_chain(),
            ChainVerdict::Invalid {
                index: 5,
                reason: "prev_hash does not link to predecessor".into()
            }
        );
    }

    #[test]
    fn append_only_earlier_hashes_stable() {
        let mut ledger = IdentityLedger::init();
        ledger.register_public_key(record(1, "UE1")).unwrap();
        let snapshot: Vec<[u8; 32]> = ledger.blocks().iter().map(|b| b.block_hash).collect();
        ledger.register_public_key(record(2, "UE2")).unwrap();
        for (i, h) in snapshot.iter().enumerate() {
            assert_eq!(&ledger.blocks()[i].block_hash, h);
        }
    }

    #[test]
    fn random_single_byte_corruption_detected() {
        let mut ledger = IdentityLedger::init();
        for i in 1..=10u64 {
            ledger.register_public_key(record(i, &format!("UE{i}"))).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let mut tampered = ledger.clone();
            let bi = rng.gen_range(1..tampered.blocks.len());
            // corrupt one byte somewhere in the block's hashed content
            match rng.gen_range(0..4) {
                0 => tampered.blocks[bi].prev_hash[rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8),
                1 => tampered.blocks[bi].block_hash[rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8),
                2 => {
                    let k = rng.gen_range(0..33);
                    tampered.blocks[bi].payload.public_key[k] ^= 1 << rng.gen_range(0..8);
                }
                _ => tampered.blocks[bi].payload.registered_at_ms ^= 1 << rng.gen_range(0..64),
            }
            assert!(!tampered.verify_chain().is_valid());
        }
    }

    #[test]
    fn file_roundtrip_verifies() {
        let mut ledger = IdentityLedger::init();
        for i in 1..=4u64 {
            ledger.register_public_key(record(i, &format!("UE{i}"))).unwrap();
        }
        let text = ledger.to_file_string();
        let loaded = IdentityLedger::from_file_string(&text).unwrap();
        assert_eq!(loaded, ledger);
        assert!(loaded.verify_chain().is_valid());
    }
}
