//! Monte-Carlo study of how often sketches ignore a non-member.
//!
//! For each requested cardinality `n` the simulation draws many random
//! HyperLogLog sketches of `n` distinct elements, then measures, for many
//! random targets known not to be among those elements, the fraction of
//! sketches each target is ignored by. The per-target fractions are
//! summarized as percentiles. Elements live in the `e:` namespace and
//! targets in `t:`, so target non-membership holds by construction.
//!
//! Every random draw comes from a seeded, domain-separated substream keyed
//! by the indices of the object being drawn, never from shared generator
//! state. Reports are therefore bit-identical across runs and across
//! thread counts.

use super::{substream, AttackError, DOMAIN_ELEMENTS, DOMAIN_RHO_TARGETS, DOMAIN_TARGETS};
use crate::hash::{hash_element, HashValue, Salt};
use crate::sketch::{Sketch, P_MAX, P_MIN};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Reported percentiles over per-target ignore fractions, in output order:
/// first permille, first, tenth, median, maximum.
pub const PERCENTILES: [(&str, f64); 5] = [
    ("p0.1", 0.001),
    ("p1", 0.01),
    ("p10", 0.10),
    ("p50", 0.50),
    ("p100", 1.0),
];

/// Statistical floor below which percentile estimates are meaningless.
const MIN_TARGETS: u32 = 100;
const MIN_SKETCHES: u32 = 100;

/// Parameters of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// HyperLogLog register exponent.
    pub p: u8,
    /// Sketch cardinalities to study.
    pub cardinalities: Vec<u64>,
    /// Number of random targets per cardinality.
    pub num_targets: u32,
    /// Number of random sketches per cardinality.
    pub num_sketches: u32,
    /// Seed all substreams are derived from.
    pub seed: u64,
    /// Worker threads; 0 uses the process-wide default pool.
    pub threads: usize,
}

impl SimulationConfig {
    /// Desk-scale defaults: minutes of work, matching the acceptance setup.
    pub fn desk(seed: u64) -> SimulationConfig {
        SimulationConfig {
            p: 15,
            cardinalities: vec![1_000, 10_000],
            num_targets: 500,
            num_sketches: 200,
            seed,
            threads: 0,
        }
    }

    /// Full-scale defaults reproducing the reference study's trial counts.
    pub fn full(seed: u64) -> SimulationConfig {
        SimulationConfig {
            p: 15,
            cardinalities: vec![1_000, 10_000, 100_000, 1_000_000],
            num_targets: 10_000,
            num_sketches: 1_000,
            seed,
            threads: 0,
        }
    }

    /// Total add operations the run will perform.
    pub fn add_operations(&self) -> u128 {
        let per_sketch_set: u128 = self.cardinalities.iter().map(|&n| n as u128).sum();
        per_sketch_set * self.num_sketches as u128
    }

    fn validate(&self) -> Result<(), AttackError> {
        if !(P_MIN..=P_MAX).contains(&self.p) {
            return Err(AttackError::Domain(format!(
                "p = {} outside [{P_MIN}, {P_MAX}]",
                self.p
            )));
        }
        if self.num_targets < MIN_TARGETS {
            return Err(AttackError::Domain(format!(
                "need at least {MIN_TARGETS} targets, got {}",
                self.num_targets
            )));
        }
        if self.num_sketches < MIN_SKETCHES {
            return Err(AttackError::Domain(format!(
                "need at least {MIN_SKETCHES} sketches, got {}",
                self.num_sketches
            )));
        }
        if self.cardinalities.is_empty() {
            return Err(AttackError::Domain("no cardinalities given".into()));
        }
        if self.cardinalities.iter().any(|&n| n == 0) {
            return Err(AttackError::Domain("cardinality 0 is not simulable".into()));
        }
        Ok(())
    }
}

/// One percentile of one cardinality's per-target ignore fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgnoreRow {
    pub cardinality: u64,
    pub percentile: String,
    pub ignore_fraction: f64,
}

/// Full simulation result, reproducible from its embedded config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgnoreReport {
    pub config: SimulationConfig,
    /// Cardinality-major, percentiles in [`PERCENTILES`] order.
    pub rows: Vec<IgnoreRow>,
}

impl IgnoreReport {
    /// CSV rows `cardinality,percentile_label,ignore_fraction`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cardinality,percentile_label,ignore_fraction\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{:.9}\n",
                row.cardinality, row.percentile, row.ignore_fraction
            ));
        }
        out
    }

    /// JSON document with the full config for reproduction.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Looks up one percentile value.
    pub fn fraction(&self, cardinality: u64, percentile: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.cardinality == cardinality && r.percentile == percentile)
            .map(|r| r.ignore_fraction)
    }
}

fn stream_tag(seed: u64, domain: u64, a: u64, b: u64) -> u128 {
    substream(seed, domain, a, b).random()
}

/// The deterministic element set sketch number `stream_b` of cardinality
/// group `stream_a` is built from.
pub fn random_elements(seed: u64, stream_a: u64, stream_b: u64, n: u64) -> Vec<String> {
    let tag = stream_tag(seed, DOMAIN_ELEMENTS, stream_a, stream_b);
    (0..n).map(|i| format!("e:{tag:032x}:{i}")).collect()
}

/// The deterministic target list shared by all cardinalities of a run.
pub fn random_targets(seed: u64, count: u32) -> Vec<String> {
    (0..count as u64)
        .map(|j| {
            let tag = stream_tag(seed, DOMAIN_TARGETS, j, 0);
            format!("t:{tag:032x}:{j}")
        })
        .collect()
}

/// Finds `count` target strings whose hash has exactly the wanted 1-based
/// rho under `p`, by seeded rejection sampling. Used to compare empirical
/// ignore fractions against their analytic value for a known rho class.
pub fn targets_with_rho(
    p: u8,
    rho: u8,
    count: usize,
    seed: u64,
    salt: &Salt,
) -> Result<Vec<String>, AttackError> {
    let mut rng = substream(seed, DOMAIN_RHO_TARGETS, rho as u64, 0);
    let mut found = Vec::with_capacity(count);
    // Acceptance probability is 2^-rho; this cap is generous for any rho
    // a test would ask for.
    let max_attempts = (count as u64)
        .saturating_mul(1u64 << rho.min(40))
        .saturating_mul(1000)
        .max(1_000_000);
    for _ in 0..max_attempts {
        if found.len() == count {
            break;
        }
        let tag: u128 = rng.random();
        let candidate = format!("t:{tag:032x}:r{rho}");
        let h = hash_element(candidate.as_bytes(), salt).expect("candidate is non-empty");
        if h.rho(p) == rho {
            found.push(candidate);
        }
    }
    if found.len() < count {
        return Err(AttackError::Domain(format!(
            "could not find {count} targets with rho {rho} at p {p}"
        )));
    }
    Ok(found)
}

fn build_random_hll(p: u8, seed: u64, cidx: u64, sidx: u64, n: u64, salt: &Salt) -> Sketch {
    let tag = stream_tag(seed, DOMAIN_ELEMENTS, cidx, sidx);
    let mut sk = Sketch::hll(p, salt).expect("p was validated");
    for i in 0..n {
        sk.add(format!("e:{tag:032x}:{i}").as_bytes(), salt)
            .expect("fixed salt always matches");
    }
    sk
}

/// Nearest-rank percentile over an ascending-sorted slice.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Runs the study described in the module docs.
///
/// The returned report is a pure function of the config: rerunning it, on
/// any number of threads, reproduces it bit for bit.
pub fn simulate_ignore_probabilities(
    config: &SimulationConfig,
) -> Result<IgnoreReport, AttackError> {
    config.validate()?;
    let run = || {
        // The ignore probability of a target depends only on hash values,
        // which are uniform under any salt; a fixed salt keeps the report
        // reproducible without weakening what it measures.
        let salt = Salt::default_public();
        let target_hashes: Vec<HashValue> = random_targets(config.seed, config.num_targets)
            .iter()
            .map(|t| hash_element(t.as_bytes(), &salt).expect("targets are non-empty"))
            .collect();
        let mut rows =
            Vec::with_capacity(config.cardinalities.len() * PERCENTILES.len());
        for (cidx, &n) in config.cardinalities.iter().enumerate() {
            let per_sketch: Vec<Vec<bool>> = (0..config.num_sketches as u64)
                .into_par_iter()
                .map(|sidx| {
                    let sk = build_random_hll(config.p, config.seed, cidx as u64, sidx, n, &salt);
                    target_hashes.iter().map(|&h| sk.ignores_hash(h)).collect()
                })
                .collect();
            let mut counts = vec![0u32; target_hashes.len()];
            for flags in &per_sketch {
                for (count, &ignored) in counts.iter_mut().zip(flags.iter()) {
                    *count += ignored as u32;
                }
            }
            let mut fractions: Vec<f64> = counts
                .iter()
                .map(|&c| c as f64 / config.num_sketches as f64)
                .collect();
            fractions.sort_unstable_by(f64::total_cmp);
            for (label, q) in PERCENTILES {
                rows.push(IgnoreRow {
                    cardinality: n,
                    percentile: label.to_string(),
                    ignore_fraction: nearest_rank(&fractions, q),
                });
            }
        }
        IgnoreReport {
            config: config.clone(),
            rows,
        }
    };
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| AttackError::Domain(format!("thread pool: {e}")))?;
        Ok(pool.install(run))
    } else {
        Ok(run())
    }
}
