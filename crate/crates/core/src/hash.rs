//! Keyed 64-bit hashing and the bucket/rho decomposition used by the sketches.
//!
//! Every sketch sees elements only through [`hash_element`], a keyed
//! cryptographic hash truncated to 64 bits. The key (the "salt") is part of
//! the sketch contract: sketches are only comparable or mergeable when built
//! under the same salt. To enforce that without shipping the key around, each
//! [`Salt`] carries a one-way 64-bit fingerprint that is embedded in sketch
//! state and in the serialized format.
//!
//! Running without a secret salt means running with [`Salt::default_public`],
//! a fixed, well-known key. That keeps unsalted deployments interoperable,
//! which is precisely the property the salting mitigation takes away.

use sha2::{Digest, Sha256};

use crate::sketch::SketchError;

/// Domain prefix for element hashing.
const ELEMENT_DOMAIN: &[u8] = b"sketch-element-hash-v1";
/// Domain prefix for salt fingerprints, disjoint from element hashing.
const FINGERPRINT_DOMAIN: &[u8] = b"sketch-salt-fingerprint-v1";

/// Minimum length of a salt key in bytes.
pub const MIN_SALT_KEY_LEN: usize = 16;

/// The well-known key used when no secret salt is configured.
pub const DEFAULT_SALT_KEY: &[u8] = b"public-default-sketch-salt-00001";

/// A hashing key plus its one-way 64-bit fingerprint.
#[derive(Clone)]
pub struct Salt {
    key: Vec<u8>,
    fingerprint: u64,
}

impl Salt {
    /// Creates a salt from a secret key of at least [`MIN_SALT_KEY_LEN`] bytes.
    pub fn new(key: &[u8]) -> Result<Salt, SketchError> {
        if key.len() < MIN_SALT_KEY_LEN {
            return Err(SketchError::InvalidParams(format!(
                "salt key must be at least {} bytes, got {}",
                MIN_SALT_KEY_LEN,
                key.len()
            )));
        }
        let mut h = Sha256::new();
        h.update(FINGERPRINT_DOMAIN);
        h.update(key);
        let digest = h.finalize();
        Ok(Salt {
            key: key.to_vec(),
            fingerprint: u64::from_be_bytes(digest[..8].try_into().unwrap()),
        })
    }

    /// The fixed, publicly known salt: hashing is still keyed, but everyone
    /// holds the key.
    pub fn default_public() -> Salt {
        Salt::new(DEFAULT_SALT_KEY).expect("default key is long enough")
    }

    /// One-way 64-bit fingerprint of the key. Safe to embed in sketches and
    /// files; it does not reveal the key.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Key bytes, for writing a salt file. Handle with care.
    pub fn key(&self) -> &[u8] {
        &self.key
    }
}

impl std::fmt::Debug for Salt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Never print the key itself.
        write!(f, "Salt(fingerprint={:016x})", self.fingerprint)
    }
}

/// A 64-bit element hash.
///
/// Sketches slice it into a bucket index (the top `p` bits) and a rank `rho`
/// (the 1-based position of the leftmost 1-bit among the remaining `64 - p`
/// bits). When all remaining bits are zero, `rho` is the sentinel `65 - p`,
/// one past the largest attainable position.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct HashValue(pub u64);

impl HashValue {
    /// Top `p` bits, interpreted as a bucket index in `[0, 2^p)`.
    pub fn bucket(self, p: u8) -> u32 {
        debug_assert!(p >= 1 && p <= 32);
        (self.0 >> (64 - p as u32)) as u32
    }

    /// 1-based position of the leftmost 1-bit after the first `p` bits, or
    /// the sentinel `65 - p` when no 1-bit remains.
    pub fn rho(self, p: u8) -> u8 {
        debug_assert!(p >= 1 && p <= 32);
        let rest = self.0 << p;
        if rest == 0 {
            65 - p
        } else {
            rest.leading_zeros() as u8 + 1
        }
    }
}

/// Hashes one element under the given salt.
///
/// The key is bound into the digest with a length prefix so distinct
/// (key, element) splits cannot collide. Empty elements are rejected; the
/// sketches have no way to tell "nothing" from "the empty string".
pub fn hash_element(element: &[u8], salt: &Salt) -> Result<HashValue, SketchError> {
    if element.is_empty() {
        return Err(SketchError::InvalidElement("empty element"));
    }
    let mut h = Sha256::new();
    h.update(ELEMENT_DOMAIN);
    h.update((salt.key.len() as u64).to_le_bytes());
    h.update(&salt.key);
    h.update(element);
    let digest = h.finalize();
    Ok(HashValue(u64::from_be_bytes(
        digest[..8].try_into().unwrap(),
    )))
}
