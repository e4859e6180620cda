//! Content digests for observations and tree nodes.
//!
//! A state is identified by the SHA-256 of its canonical serialization:
//! compact JSON with object keys sorted. The digest is rendered as lowercase
//! hex wherever it leaves the process.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Digest of the canonical empty observation `{}`.
pub const EMPTY_OBSERVATION_DIGEST: &str =
    "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("observation is not valid JSON: {0}")]
    Malformed(String),
    #[error("observation must be a JSON object")]
    NotAnObject,
    #[error("observation bytes are not in canonical form")]
    NotCanonical,
    #[error("invalid digest hex {0:?}")]
    BadHex(String),
}

macro_rules! digest_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name([u8; 32]);

        impl $name {
            pub fn from_bytes(bytes: [u8; 32]) -> Self {
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, FingerprintError> {
                let mut out = [0u8; 32];
                if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
                    return Err(FingerprintError::BadHex(s.to_string()));
                }
                hex::decode_to_slice(s, &mut out)
                    .map_err(|_| FingerprintError::BadHex(s.to_string()))?;
                Ok(Self(out))
            }

            /// First 12 hex characters, for diagnostics.
            pub fn short(&self) -> String {
                hex::encode(&self.0[..6])
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.short())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

digest_newtype!(
    /// Identity of an environment state: digest of its canonical observation.
    StateFingerprint
);
digest_newtype!(
    /// Path-qualified identity of a search-tree node.
    NodeId
);

pub(crate) fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

/// Key-sorted compact JSON for any serializable value.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // Routing through `Value` sorts object keys (serde_json's map is a BTreeMap).
    let value = serde_json::to_value(value).expect("value serializes to JSON");
    serde_json::to_string(&value).expect("JSON value serializes")
}

/// Fingerprint the canonical serialization of an observation.
///
/// Rejects bytes that are not a JSON object or that are not already in
/// canonical form, so that two encodings of one observation can never yield
/// two identities.
pub fn fingerprint(canonical: &[u8]) -> Result<StateFingerprint, FingerprintError> {
    let value: serde_json::Value =
        serde_json::from_slice(canonical).map_err(|e| FingerprintError::Malformed(e.to_string()))?;
    if !value.is_object() {
        return Err(FingerprintError::NotAnObject);
    }
    let recanon = serde_json::to_string(&value).expect("JSON value serializes");
    if recanon.as_bytes() != canonical {
        return Err(FingerprintError::NotCanonical);
    }
    Ok(StateFingerprint(sha256(&[canonical])))
}
