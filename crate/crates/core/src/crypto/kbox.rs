//! The per-UE credential record: own key pair plus the base-station key
//! received at registration.
//!
//! Persisted as a plain text record:
//!
//! ```text
//! curve: secp256k1
//! private: <64 hex chars>
//! public: <66 hex chars>
//! bs-private: <64 hex chars>   (present after registration)
//! ```

use std::fmt::Write as _;

use super::curve::CurveParams;
use super::keys::{derive_public_key, KeyRole, PrivateKey, PublicKey};
use super::CryptoError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KBox {
    pub own_private: PrivateKey,
    pub own_public: PublicKey,
    pub bs_private: Option<PrivateKey>,
}

impl KBox {
    /// Builds a KBox from a private key, computing the matching public
    /// point.
    pub fn new(own_private: PrivateKey) -> Result<Self, CryptoError> {
        let own_public = derive_public_key(&own_private, &CurveParams::secp256k1())?;
        Ok(KBox {
            own_private,
            own_public,
            bs_private: None,
        })
    }

    pub fn with_bs_key(mut self, bs: PrivateKey) -> Self {
        self.bs_private = Some(bs);
        self
    }

    /// Serializes to the text key-file format.
    pub fn to_key_file(&self) -> String {
        let mut out = String::new();
        writeln!(out, "curve: secp256k1").unwrap();
        writeln!(out, "private: {}", hex::encode(self.own_private.to_bytes())).unwrap();
        writeln!(out, "public: {}", hex::encode(self.own_public.to_compressed())).unwrap();
        if let Some(bs) = &self.bs_private {
            writeln!(out, "bs-private: {}", hex::encode(bs.to_bytes())).unwrap();
        }
        out
    }

    /// Parses the text key-file format, checking the key-pair invariant.
    pub fn from_key_file(text: &str) -> Result<Self, CryptoError> {
        let mut curve = None;
        let mut private = None;
        let mut public = None;
        let mut bs_private = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| CryptoError::MalformedKey(format!("bad key-file line: {line}")))?;
            let value = value.trim();
            match key.trim() {
                "curve" => curve = Some(value.to_string()),
                "private" => private = Some(parse_hex32(value)?),
                "public" => public = Some(value.to_string()),
                "bs-private" => bs_private = Some(parse_hex32(value)?),
                other => {
                    return Err(CryptoError::MalformedKey(format!(
                        "unknown key-file field: {other}"
                    )))
                }
            }
        }
        match curve.as_deref() {
            Some("secp256k1") => {}
            other => {
                return Err(CryptoError::MalformedKey(format!(
                    "unsupported curve {other:?}"
                )))
            }
        }
        let private = private
            .ok_or_else(|| CryptoError::MalformedKey("missing private field".into()))?;
        let own_private = PrivateKey::from_bytes(&private, KeyRole::Ue)?;
        let kbox = KBox::new(own_private)?;
        if let Some(pub_hex) = public {
            let bytes = hex::decode(&pub_hex)
                .map_err(|e| CryptoError::MalformedKey(format!("bad public hex: {e}")))?;
            let stated = PublicKey::from_compressed(&bytes)?;
            if stated != kbox.own_public {
                return Err(CryptoError::MalformedKey(
                    "public point does not match private scalar".into(),
                ));
            }
        }
        Ok(match bs_private {
            Some(bytes) => kbox.with_bs_key(PrivateKey::from_bytes(&bytes, KeyRole::BaseStation)?),
            None => kbox,
        })
    }
}

fn parse_hex32(value: &str) -> Result<[u8; 32], CryptoError> {
    let bytes = hex::decode(value)
        .map_err(|e| CryptoError::MalformedKey(format!("bad hex scalar: {e}")))?;
    bytes
        .as_slice()
        .try_into()
        .map_err(|_| CryptoError::MalformedKey("scalar must be 32 bytes".into()))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn key_file_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pr = PrivateKey::from_entropy(&mut rng, KeyRole::Ue);
        let bs = PrivateKey::from_entropy(&mut rng, KeyRole::BaseStation);
        let kbox = KBox::new(pr).unwrap().with_bs_key(bs);
        let text = kbox.to_key_file();
        assert!(text.contains("curve: secp256k1"));
        let parsed = KBox::from_key_file(&text).unwrap();
        assert_eq!(parsed.own_private.to_bytes(), kbox.own_private.to_bytes());
        assert_eq!(parsed.own_public, kbox.own_public);
        assert!(parsed.bs_private.is_some());
    }

    #[test]
    fn mismatched_public_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pr = PrivateKey::from_entropy(&mut rng, KeyRole::Ue);
        let other = PrivateKey::from_entropy(&mut rng, KeyRole::Ue);
        let kbox = KBox::new(pr).unwrap();
        let wrong_pub = KBox::new(other).unwrap().own_public;
        let mut text = format!(
            "curve: secp256k1\nprivate: {}\n",
            hex::encode(kbox.own_private.to_bytes())
        );
        text.push_str(&format!("public: {}\n", hex::encode(wrong_pub.to_compressed())));
        assert!(KBox::from_key_file(&text).is_err());
    }
}
