//! Intersection attack over several sketches sharing a suspected member.
//!
//! An attacker holding sketches of several different sets, all built with
//! the same parameters and salt, can intersect the information they store:
//! an element present in every set must be consistent with every sketch.
//! KMV sketches store raw hashes, so intersecting their lists yields
//! concrete candidate hash values. Register sketches only constrain the
//! candidate's (bucket, rho) pair, and PCSA its (bucket, bit) pair; those
//! constraints are necessary conditions, not a reconstruction.

use super::AttackError;
use crate::hash::HashValue;
use crate::sketch::{Algo, Sketch, SketchError};
use crate::sketch::State;
use serde::Serialize;

/// What the intersection pinned down.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CandidateConstraints {
    /// KMV: hash values present in every sketch's minima list.
    Hashes(Vec<u64>),
    /// LogLog/HLL: per bucket, the largest rho an element present in all
    /// sketches could have registered (the pointwise register minimum);
    /// buckets with minimum zero are omitted.
    Buckets(Vec<(u32, u8)>),
    /// PCSA: (bucket, 1-based rho bit) pairs set in every sketch.
    Bits(Vec<(u32, u8)>),
}

/// Result of [`intersection_attack`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionFinding {
    pub algo: Algo,
    pub num_sketches_used: usize,
    pub constraints: CandidateConstraints,
    /// Size of the candidate search space the constraints leave open:
    /// list length for KMV, count of admissible (bucket, rho) or
    /// (bucket, bit) pairs otherwise. Weakly decreases as more sketches
    /// are intersected.
    pub candidate_count: usize,
    /// Whether the supplied ground-truth hash satisfies every constraint;
    /// absent when no ground truth was given.
    pub contains_target: Option<bool>,
}

fn kmv_intersection(lists: Vec<&[u64]>) -> Vec<u64> {
    let mut acc: Vec<u64> = lists[0].to_vec();
    for list in &lists[1..] {
        // Both sides are sorted ascending.
        let mut kept = Vec::with_capacity(acc.len().min(list.len()));
        let (mut i, mut j) = (0, 0);
        while i < acc.len() && j < list.len() {
            match acc[i].cmp(&list[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    kept.push(acc[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        acc = kept;
    }
    acc
}

/// Intersects the information stored in `sketches` about a hypothetical
/// element present in all of their underlying sets.
///
/// All sketches must share algorithm, parameters, and salt fingerprint.
/// With `true_target_hash` supplied, the finding also reports whether that
/// hash survives every constraint (it always does when the target really
/// is in every set).
pub fn intersection_attack(
    sketches: &[Sketch],
    true_target_hash: Option<HashValue>,
) -> Result<IntersectionFinding, AttackError> {
    if sketches.len() < 2 {
        return Err(AttackError::Domain(format!(
            "intersection needs at least 2 sketches, got {}",
            sketches.len()
        )));
    }
    let first = &sketches[0];
    for other in &sketches[1..] {
        if other.algo() != first.algo() || other.param() != first.param() {
            return Err(SketchError::ParamMismatch(format!(
                "{} with parameter {} vs {} with parameter {}",
                first.algo().name(),
                first.param(),
                other.algo().name(),
                other.param()
            ))
            .into());
        }
        if other.salt_fingerprint() != first.salt_fingerprint() {
            return Err(SketchError::SaltMismatch {
                expected: first.salt_fingerprint(),
                got: other.salt_fingerprint(),
            }
            .into());
        }
    }

    let (constraints, candidate_count, contains) = match &first.state {
        State::Kmv(_) => {
            let lists: Vec<&[u64]> = sketches
                .iter()
                .map(|s| match &s.state {
                    State::Kmv(k) => k.hashes.as_slice(),
                    _ => unreachable!("algos were checked equal"),
                })
                .collect();
            let hashes = kmv_intersection(lists);
            let contains = true_target_hash.map(|h| hashes.binary_search(&h.0).is_ok());
            let count = hashes.len();
            (CandidateConstraints::Hashes(hashes), count, contains)
        }
        State::LogLog(_) | State::Hll(_) => {
            let regs: Vec<&[u8]> = sketches
                .iter()
                .map(|s| match &s.state {
                    State::LogLog(r) | State::Hll(r) => r.regs.as_slice(),
                    _ => unreachable!("algos were checked equal"),
                })
                .collect();
            let p = first.param() as u8;
            let mut buckets = Vec::new();
            let mut count = 0usize;
            for b in 0..regs[0].len() {
                let min = regs.iter().map(|r| r[b]).min().unwrap_or(0);
                if min > 0 {
                    buckets.push((b as u32, min));
                    count += min as usize;
                }
            }
            let contains = true_target_hash.map(|h| {
                let b = h.bucket(p) as usize;
                let rho = h.rho(p);
                regs.iter().all(|r| r[b] >= rho)
            });
            (CandidateConstraints::Buckets(buckets), count, contains)
        }
        State::Pcsa(_) => {
            let maps: Vec<&[u32]> = sketches
                .iter()
                .map(|s| match &s.state {
                    State::Pcsa(x) => x.maps.as_slice(),
                    _ => unreachable!("algos were checked equal"),
                })
                .collect();
            let log2k = first.param().trailing_zeros() as u8;
            let mut bits = Vec::new();
            for b in 0..maps[0].len() {
                let common = maps.iter().fold(u32::MAX, |acc, m| acc & m[b]);
                for bit in 0..32u8 {
                    if common & (1 << bit) != 0 {
                        bits.push((b as u32, bit + 1));
                    }
                }
            }
            let contains = true_target_hash.map(|h| {
                let b = h.bucket(log2k) as usize;
                let bit = h.rho(log2k).min(32) - 1;
                maps.iter().all(|m| m[b] & (1 << bit) != 0)
            });
            let count = bits.len();
            (CandidateConstraints::Bits(bits), count, contains)
        }
    };

    Ok(IntersectionFinding {
        algo: first.algo(),
        num_sketches_used: sketches.len(),
        constraints,
        candidate_count,
        contains_target: contains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::{hash_element, Salt};

    fn sketch_with(algo: Algo, param: u32, salt: &Salt, shared: &str, extra: &[String]) -> Sketch {
        let mut sk = Sketch::empty(algo, param, salt).unwrap();
        sk.add(shared.as_bytes(), salt).unwrap();
        for e in extra {
            sk.add(e.as_bytes(), salt).unwrap();
        }
        sk
    }

    fn fleet(algo: Algo, param: u32, count: usize, per_sketch: usize) -> (Vec<Sketch>, HashValue) {
        let salt = Salt::default_public();
        let shared = "victim";
        let sketches = (0..count)
            .map(|s| {
                let extra: Vec<String> =
                    (0..per_sketch).map(|i| format!("other-{s}-{i}")).collect();
                sketch_with(algo, param, &salt, shared, &extra)
            })
            .collect();
        (sketches, hash_element(shared.as_bytes(), &salt).unwrap())
    }

    #[test]
    fn kmv_candidates_contain_the_shared_element() {
        let (sketches, h) = fleet(Algo::Kmv, 1 << 10, 10, 100);
        let finding = intersection_attack(&sketches, Some(h)).unwrap();
        assert_eq!(finding.contains_target, Some(true));
        match &finding.constraints {
            CandidateConstraints::Hashes(hs) => assert!(hs.contains(&h.0)),
            other => panic!("wrong constraint kind: {other:?}"),
        }
    }

    #[test]
    fn candidate_count_shrinks_with_more_sketches() {
        for algo in [Algo::Kmv, Algo::Pcsa, Algo::LogLog, Algo::Hll] {
            let param = match algo {
                Algo::Kmv | Algo::Pcsa => 256,
                _ => 8,
            };
            let (sketches, h) = fleet(algo, param, 16, 60);
            let mut prev = usize::MAX;
            for used in [2usize, 4, 8, 16] {
                let finding = intersection_attack(&sketches[..used], Some(h)).unwrap();
                assert!(
                    finding.candidate_count <= prev,
                    "{algo:?}: {used} sketches grew the candidate set"
                );
                assert_eq!(finding.contains_target, Some(true), "{algo:?}");
                assert_eq!(finding.num_sketches_used, used);
                prev = finding.candidate_count;
            }
        }
    }

    #[test]
    fn disjoint_kmv_sets_leave_nothing() {
        let salt = Salt::default_public();
        let mut empty_hits = 0;
        for trial in 0..20 {
            let a: Vec<String> = (0..80).map(|i| format!("a-{trial}-{i}")).collect();
            let b: Vec<String> = (0..80).map(|i| format!("b-{trial}-{i}")).collect();
            let mut ska = Sketch::kmv(128, &salt).unwrap();
            let mut skb = Sketch::kmv(128, &salt).unwrap();
            for e in &a {
                ska.add(e.as_bytes(), &salt).unwrap();
            }
            for e in &b {
                skb.add(e.as_bytes(), &salt).unwrap();
            }
            let finding = intersection_attack(&[ska, skb], None).unwrap();
            if finding.candidate_count == 0 {
                empty_hits += 1;
            }
            assert!(finding.contains_target.is_none());
        }
        assert_eq!(empty_hits, 20, "64-bit hash collisions are negligible");
    }

    #[test]
    fn register_constraints_bound_the_target_rho() {
        let (sketches, h) = fleet(Algo::Hll, 6, 4, 30);
        let finding = intersection_attack(&sketches, Some(h)).unwrap();
        let (bucket, rho) = (h.bucket(6), h.rho(6));
        match &finding.constraints {
            CandidateConstraints::Buckets(bs) => {
                let (_, min) = bs.iter().find(|(b, _)| *b == bucket).expect("bucket present");
                assert!(*min >= rho);
            }
            other => panic!("wrong constraint kind: {other:?}"),
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let salt = Salt::default_public();
        let other_salt = Salt::new(b"intersect-salt-key-0123456789ab").unwrap();
        let a = Sketch::hll(8, &salt).unwrap();
        let b = Sketch::hll(9, &salt).unwrap();
        let c = Sketch::hll(8, &other_salt).unwrap();
        let d = Sketch::kmv(256, &salt).unwrap();
        assert!(matches!(
            intersection_attack(&[a.clone()], None),
            Err(AttackError::Domain(_))
        ));
        assert!(matches!(
            intersection_attack(&[a.clone(), b], None),
            Err(AttackError::Sketch(SketchError::ParamMismatch(_)))
        ));
        assert!(matches!(
            intersection_attack(&[a.clone(), c], None),
            Err(AttackError::Sketch(SketchError::SaltMismatch { .. }))
        ));
        assert!(matches!(
            intersection_attack(&[a, d], None),
            Err(AttackError::Sketch(SketchError::ParamMismatch(_)))
        ));
    }
}
