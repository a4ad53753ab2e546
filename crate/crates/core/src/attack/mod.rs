//! Executable attacks against cardinality sketches.
//!
//! Four attacks live here: the add-and-check membership oracle
//! ([`membership_attack`]), the Monte-Carlo study of how often sketches
//! ignore a non-member target ([`simulate_ignore_probabilities`]), the
//! multi-sketch intersection attack recovering partial hash information
//! ([`intersection_attack`]), and the estimate-comparison attack that works
//! through a merge-and-estimate API without ever seeing sketch bytes
//! ([`external_api_attack`]).

pub mod external;
pub mod intersect;
pub mod membership;
pub mod simulate;

pub use external::{external_api_attack, EstimateService, ExternalAttackConfig, ExternalFinding};
pub use intersect::{intersection_attack, CandidateConstraints, IntersectionFinding};
pub use membership::{membership_attack, membership_attack_hash, MembershipFinding};
pub use simulate::{
    random_elements, random_targets, simulate_ignore_probabilities, targets_with_rho,
    IgnoreReport, IgnoreRow, SimulationConfig, PERCENTILES,
};

use crate::sketch::SketchError;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Ways an attack run can fail.
#[derive(Debug)]
pub enum AttackError {
    /// Invalid attack parameters.
    Domain(String),
    /// Propagated sketch-layer failure (salt or parameter mismatch, ...).
    Sketch(SketchError),
    /// The queried estimate service refused or misbehaved.
    Service(String),
}

impl fmt::Display for AttackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackError::Domain(msg) => write!(f, "invalid attack parameters: {msg}"),
            AttackError::Sketch(e) => write!(f, "sketch error: {e}"),
            AttackError::Service(msg) => write!(f, "service error: {msg}"),
        }
    }
}

impl std::error::Error for AttackError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            AttackError::Sketch(e) => Some(e),
            _ => None,
        }
    }
}

impl From<SketchError> for AttackError {
    fn from(e: SketchError) -> Self {
        AttackError::Sketch(e)
    }
}

/// Independent, reproducible RNG substream.
///
/// Simulation work is parallelized over sketches and targets; giving every
/// (domain, a, b) coordinate its own generator keyed by the run seed makes
/// the sampled streams independent of scheduling and thread count.
pub(crate) fn substream(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Substream domain tags. Each sampling purpose gets its own tag so streams
/// never overlap even when index pairs coincide.
pub(crate) const DOMAIN_ELEMENTS: u64 = 1;
pub(crate) const DOMAIN_TARGETS: u64 = 2;
pub(crate) const DOMAIN_RHO_TARGETS: u64 = 3;
