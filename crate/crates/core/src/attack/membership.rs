//! Add-and-check membership inference.
//!
//! The attacker holds a sketch and asks whether a chosen target was among
//! the elements summarized in it. She tries adding the target: if the
//! state changes, the target was certainly absent; if the state does not
//! change, she applies a Bayesian update whose strength is the reciprocal
//! of the probability that a sketch of this cardinality would ignore a
//! random non-member.

use super::AttackError;
use crate::bounds::{ignore_prob_to_epsilon, posterior_from_prior, PosteriorQuery};
use crate::hash::{hash_element, HashValue, Salt};
use crate::sketch::Sketch;

/// Outcome of one membership probe.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFinding {
    /// Whether adding the target would change the sketch.
    pub changed: bool,
    /// Attacker's membership belief after the observation.
    ///
    /// A changed sketch proves non-membership, so the posterior drops to 0
    /// (the privacy definition is asymmetric and permits this). An
    /// unchanged sketch raises the prior by the likelihood ratio `1/q`.
    pub posterior: f64,
    /// The ignore probability `q` the update was computed with.
    pub ignore_probability: f64,
    /// `-ln(q)`, the privacy-loss scale of the observation.
    pub epsilon: f64,
}

fn finding(
    changed: bool,
    prior: f64,
    ignore_probability: f64,
) -> Result<MembershipFinding, AttackError> {
    if !prior.is_finite() || prior <= 0.0 || prior >= 1.0 {
        return Err(AttackError::Domain(format!(
            "prior {prior} must lie strictly inside (0, 1)"
        )));
    }
    let epsilon = ignore_prob_to_epsilon(ignore_probability)
        .map_err(|e| AttackError::Domain(e.to_string()))?;
    let posterior = if changed {
        0.0
    } else {
        posterior_from_prior(&PosteriorQuery { prior, epsilon })
            .map_err(|e| AttackError::Domain(e.to_string()))?
    };
    Ok(MembershipFinding {
        changed,
        posterior,
        ignore_probability,
        epsilon,
    })
}

/// Runs the add-and-check attack against `m` for `target`.
///
/// `ignore_prob` is the attacker's model of how often a sketch like this
/// ignores a random non-member; when absent it is estimated from the
/// sketch's own state. The salt must match the sketch: an attacker without
/// the salt cannot even compute the target's hash, which is exactly the
/// salting mitigation (see [`membership_attack_hash`] to study what a
/// wrong-salt attacker would observe).
pub fn membership_attack(
    m: &Sketch,
    target: &[u8],
    salt: &Salt,
    prior: f64,
    ignore_prob: Option<f64>,
) -> Result<MembershipFinding, AttackError> {
    let changed = !m.is_ignored(target, salt)?;
    let h = hash_element(target, salt)?;
    let q = ignore_prob.unwrap_or_else(|| m.estimated_ignore_probability(h));
    finding(changed, prior, q)
}

/// Hash-level variant of [`membership_attack`] with no salt guard.
///
/// Takes the 64-bit hash the attacker managed to compute, however she
/// derived it. This is the primitive behind salt-mismatch studies: hashing
/// the target under the wrong salt yields a value independent of the
/// target's true hash, and the observation carries no membership signal.
pub fn membership_attack_hash(
    m: &Sketch,
    h: HashValue,
    prior: f64,
    ignore_prob: Option<f64>,
) -> Result<MembershipFinding, AttackError> {
    let changed = !m.ignores_hash(h);
    let q = ignore_prob.unwrap_or_else(|| m.estimated_ignore_probability(h));
    finding(changed, prior, q)
}
