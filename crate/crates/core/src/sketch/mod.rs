//! The four cardinality sketches behind one interface.
//!
//! A [`Sketch`] is an opaque summary of a set of elements. All four variants
//! share the same contract:
//!
//! * `add` folds one element in. Adding is idempotent and order-insensitive,
//!   so a sketch depends only on the *set* of elements it has seen.
//! * `merge_from` combines two sketches of the same shape into the sketch of
//!   the union of their streams. Merging is commutative and associative, and
//!   the empty sketch is its neutral element.
//! * `estimate` returns an approximate distinct count.
//! * `is_ignored` reports whether adding an element would leave the sketch
//!   bit-for-bit unchanged. That innocuous-looking predicate is the hook all
//!   the membership attacks hang off.
//!
//! Variants and their parameters:
//!
//! * KMV keeps the `k` smallest element hashes (`8 <= k <= 65536`).
//! * PCSA keeps `k` 32-bit bitmaps (`k` a power of two in `[16, 65536]`).
//! * LogLog and HyperLogLog keep `2^p` one-byte registers (`4 <= p <= 18`),
//!   each holding the largest rho observed for its bucket.

mod codec;
mod kmv;
mod pcsa;
mod registers;
mod rse;

pub use codec::FormatError;
pub use rse::theoretical_rse;

use crate::hash::{hash_element, HashValue, Salt};
use kmv::Kmv;
use pcsa::Pcsa;
use registers::Registers;

/// Inclusive bounds for the KMV parameter `k`.
pub const KMV_K_MIN: u32 = 8;
pub const KMV_K_MAX: u32 = 1 << 16;

/// Inclusive bounds for the PCSA bitmap count (powers of two only).
pub const PCSA_K_MIN: u32 = 16;
pub const PCSA_K_MAX: u32 = 1 << 16;

/// Inclusive bounds for the register-exponent `p` of LogLog and HyperLogLog.
pub const P_MIN: u8 = 4;
pub const P_MAX: u8 = 18;

/// Errors from sketch construction and use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SketchError {
    /// The element is not something we hash (currently: it is empty).
    InvalidElement(&'static str),
    /// A constructor parameter is out of range.
    InvalidParams(String),
    /// The salt passed in does not match the salt the sketch was built with.
    SaltMismatch { expected: u64, got: u64 },
    /// Two sketches have incompatible shape (algorithm or parameter).
    ParamMismatch(String),
    /// A memory budget that no register layout fits exactly.
    InvalidMemory(String),
    /// The byte stream is not a valid serialized sketch.
    Format(FormatError),
}

impl std::fmt::Display for SketchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SketchError::InvalidElement(msg) => write!(f, "invalid element: {msg}"),
            SketchError::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            SketchError::SaltMismatch { expected, got } => write!(
                f,
                "salt mismatch: sketch was built under fingerprint {expected:016x}, got {got:016x}"
            ),
            SketchError::ParamMismatch(msg) => write!(f, "parameter mismatch: {msg}"),
            SketchError::InvalidMemory(msg) => write!(f, "invalid memory budget: {msg}"),
            SketchError::Format(e) => write!(f, "format error: {e}"),
        }
    }
}

impl std::error::Error for SketchError {}

impl From<FormatError> for SketchError {
    fn from(e: FormatError) -> Self {
        SketchError::Format(e)
    }
}

/// Which sketch algorithm a [`Sketch`] runs.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Kmv,
    Pcsa,
    LogLog,
    Hll,
}

impl Algo {
    /// Wire code used in the serialized format.
    pub fn code(self) -> u8 {
        match self {
            Algo::Kmv => 1,
            Algo::Pcsa => 2,
            Algo::LogLog => 3,
            Algo::Hll => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Algo> {
        match code {
            1 => Some(Algo::Kmv),
            2 => Some(Algo::Pcsa),
            3 => Some(Algo::LogLog),
            4 => Some(Algo::Hll),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Kmv => "kmv",
            Algo::Pcsa => "pcsa",
            Algo::LogLog => "loglog",
            Algo::Hll => "hll",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Algo, SketchError> {
        match s.to_ascii_lowercase().as_str() {
            "kmv" => Ok(Algo::Kmv),
            "pcsa" => Ok(Algo::Pcsa),
            "loglog" => Ok(Algo::LogLog),
            "hll" | "hyperloglog" => Ok(Algo::Hll),
            other => Err(SketchError::InvalidParams(format!(
                "unknown algorithm {other:?} (expected kmv, pcsa, loglog or hll)"
            ))),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) enum State {
    Kmv(Kmv),
    Pcsa(Pcsa),
    LogLog(Registers),
    Hll(Registers),
}

/// One cardinality sketch. Equality is bit-exact structural equality of the
/// full state, including the salt fingerprint.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Sketch {
    pub(crate) state: State,
    pub(crate) salt_fingerprint: u64,
}

impl Sketch {
    /// Empty KMV sketch keeping the `k` smallest hashes.
    pub fn kmv(k: u32, salt: &Salt) -> Result<Sketch, SketchError> {
        validate_kmv_k(k)?;
        Ok(Sketch {
            state: State::Kmv(Kmv::new(k)),
            salt_fingerprint: salt.fingerprint(),
        })
    }

    /// Empty PCSA sketch with `k` 32-bit bitmaps.
    pub fn pcsa(k: u32, salt: &Salt) -> Result<Sketch, SketchError> {
        let log2k = validate_pcsa_k(k)?;
        Ok(Sketch {
            state: State::Pcsa(Pcsa::new(log2k)),
            salt_fingerprint: salt.fingerprint(),
        })
    }

    /// Empty LogLog sketch with `2^p` registers.
    pub fn loglog(p: u8, salt: &Salt) -> Result<Sketch, SketchError> {
        validate_p(p)?;
        Ok(Sketch {
            state: State::LogLog(Registers::new(p)),
            salt_fingerprint: salt.fingerprint(),
        })
    }

    /// Empty HyperLogLog sketch with `2^p` registers.
    pub fn hll(p: u8, salt: &Salt) -> Result<Sketch, SketchError> {
        validate_p(p)?;
        Ok(Sketch {
            state: State::Hll(Registers::new(p)),
            salt_fingerprint: salt.fingerprint(),
        })
    }

    /// Empty sketch by algorithm tag; `param` is `k` for KMV and PCSA, `p`
    /// for LogLog and HyperLogLog.
    pub fn empty(algo: Algo, param: u32, salt: &Salt) -> Result<Sketch, SketchError> {
        match algo {
            Algo::Kmv => Sketch::kmv(param, salt),
            Algo::Pcsa => Sketch::pcsa(param, salt),
            Algo::LogLog => Sketch::loglog(param_as_p(param)?, salt),
            Algo::Hll => Sketch::hll(param_as_p(param)?, salt),
        }
    }

    pub fn algo(&self) -> Algo {
        match &self.state {
            State::Kmv(_) => Algo::Kmv,
            State::Pcsa(_) => Algo::Pcsa,
            State::LogLog(_) => Algo::LogLog,
            State::Hll(_) => Algo::Hll,
        }
    }

    /// The shape parameter: `k` for KMV/PCSA, `p` for LogLog/HLL.
    pub fn param(&self) -> u32 {
        match &self.state {
            State::Kmv(s) => s.k,
            State::Pcsa(s) => 1 << s.log2k,
            State::LogLog(r) | State::Hll(r) => r.p as u32,
        }
    }

    pub fn salt_fingerprint(&self) -> u64 {
        self.salt_fingerprint
    }

    /// True when no element has ever been absorbed.
    pub fn is_empty(&self) -> bool {
        match &self.state {
            State::Kmv(s) => s.hashes.is_empty(),
            State::Pcsa(s) => s.maps.iter().all(|&m| m == 0),
            State::LogLog(r) | State::Hll(r) => r.regs.iter().all(|&x| x == 0),
        }
    }

    fn check_salt(&self, salt: &Salt) -> Result<(), SketchError> {
        if salt.fingerprint() != self.salt_fingerprint {
            return Err(SketchError::SaltMismatch {
                expected: self.salt_fingerprint,
                got: salt.fingerprint(),
            });
        }
        Ok(())
    }

    /// Adds one element. Idempotent; insensitive to ordering and repetition.
    pub fn add(&mut self, element: &[u8], salt: &Salt) -> Result<(), SketchError> {
        self.check_salt(salt)?;
        let h = hash_element(element, salt)?;
        self.apply_hash(h);
        Ok(())
    }

    /// Folds a precomputed hash in, bypassing the salt check.
    ///
    /// This is the raw state-transition function. It exists for simulations
    /// and attack models where the caller works at the hash level (an
    /// attacker holding raw sketch bytes is not stopped by a fingerprint
    /// comparison). Normal ingestion should go through [`Sketch::add`].
    pub fn apply_hash(&mut self, h: HashValue) {
        match &mut self.state {
            State::Kmv(s) => s.insert(h.0),
            State::Pcsa(s) => s.insert(h),
            State::LogLog(r) | State::Hll(r) => r.insert(h),
        }
    }

    /// Would `apply_hash(h)` leave the state unchanged?
    ///
    /// Same caveats as [`Sketch::apply_hash`]: no salt check, hash-level API.
    pub fn ignores_hash(&self, h: HashValue) -> bool {
        match &self.state {
            State::Kmv(s) => s.ignores(h.0),
            State::Pcsa(s) => s.ignores(h),
            State::LogLog(r) | State::Hll(r) => r.ignores(h),
        }
    }

    /// True iff adding `element` would leave the sketch bit-for-bit unchanged.
    pub fn is_ignored(&self, element: &[u8], salt: &Salt) -> Result<bool, SketchError> {
        self.check_salt(salt)?;
        let h = hash_element(element, salt)?;
        Ok(self.ignores_hash(h))
    }

    /// Merges another sketch of identical shape into this one, yielding the
    /// sketch of the union of both streams.
    pub fn merge_from(&mut self, other: &Sketch) -> Result<(), SketchError> {
        if self.algo() != other.algo() || self.param() != other.param() {
            return Err(SketchError::ParamMismatch(format!(
                "cannot merge {}({}) with {}({})",
                self.algo().name(),
                self.param(),
                other.algo().name(),
                other.param()
            )));
        }
        if self.salt_fingerprint != other.salt_fingerprint {
            return Err(SketchError::SaltMismatch {
                expected: self.salt_fingerprint,
                got: other.salt_fingerprint,
            });
        }
        match (&mut self.state, &other.state) {
            (State::Kmv(a), State::Kmv(b)) => a.merge(b),
            (State::Pcsa(a), State::Pcsa(b)) => a.merge(b),
            (State::LogLog(a), State::LogLog(b)) => a.merge(b),
            (State::Hll(a), State::Hll(b)) => a.merge(b),
            _ => unreachable!("algo equality checked above"),
        }
        Ok(())
    }

    /// Convenience wrapper returning the merge as a new sketch.
    pub fn merged(&self, other: &Sketch) -> Result<Sketch, SketchError> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    /// Approximate number of distinct elements added so far.
    pub fn estimate(&self) -> f64 {
        match &self.state {
            State::Kmv(s) => s.estimate(),
            State::Pcsa(s) => s.estimate(),
            State::LogLog(r) => registers::loglog_estimate(r),
            State::Hll(r) => registers::hll_estimate(r),
        }
    }

    /// Serializes to the binary sketch format.
    pub fn serialize(&self) -> Vec<u8> {
        codec::serialize(self)
    }

    /// Parses the binary sketch format.
    pub fn deserialize(bytes: &[u8]) -> Result<Sketch, SketchError> {
        codec::deserialize(bytes)
    }

    /// An estimate of P[a sketch of this cardinality ignores hash `h`],
    /// treating the sketch's own `estimate()` as the cardinality.
    ///
    /// Used by the membership attack when the caller supplies no ignore
    /// probability. Per algorithm this is the first-order probability that a
    /// random stream of that size already covers whatever `h` would touch.
    pub fn estimated_ignore_probability(&self, h: HashValue) -> f64 {
        let n = self.estimate().max(0.0);
        match &self.state {
            State::Kmv(s) => s.ignore_probability(h.0, n),
            State::Pcsa(s) => s.ignore_probability(h, n),
            State::LogLog(r) | State::Hll(r) => r.ignore_probability(h, n),
        }
    }
}

fn validate_kmv_k(k: u32) -> Result<(), SketchError> {
    if !(KMV_K_MIN..=KMV_K_MAX).contains(&k) {
        return Err(SketchError::InvalidParams(format!(
            "KMV k must be in [{KMV_K_MIN}, {KMV_K_MAX}], got {k}"
        )));
    }
    Ok(())
}

fn validate_pcsa_k(k: u32) -> Result<u8, SketchError> {
    if !(PCSA_K_MIN..=PCSA_K_MAX).contains(&k) || !k.is_power_of_two() {
        return Err(SketchError::InvalidParams(format!(
            "PCSA k must be a power of two in [{PCSA_K_MIN}, {PCSA_K_MAX}], got {k}"
        )));
    }
    Ok(k.trailing_zeros() as u8)
}

fn validate_p(p: u8) -> Result<(), SketchError> {
    if !(P_MIN..=P_MAX).contains(&p) {
        return Err(SketchError::InvalidParams(format!(
            "p must be in [{P_MIN}, {P_MAX}], got {p}"
        )));
    }
    Ok(())
}

fn param_as_p(param: u32) -> Result<u8, SketchError> {
    u8::try_from(param).map_err(|_| {
        SketchError::InvalidParams(format!("p must be in [{P_MIN}, {P_MAX}], got {param}"))
    })
}
