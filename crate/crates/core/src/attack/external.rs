//! Membership probing through an estimates-only API.
//!
//! Even a service that never returns sketch bytes leaks membership: merge
//! is idempotent, so folding in a one-element sketch leaves the estimate
//! bit-identical exactly when the element was already present. The attack
//! ingests a probe set `{target}` under a dimension it controls and
//! compares the estimate of the victim keys with and without the probe.
//! Coarsening the reported estimate masks the non-member side of the
//! comparison and degrades the attack.

use super::AttackError;
use crate::sketch::Algo;

/// The estimates-only surface the attacker can reach.
///
/// Implementations wrap an in-process service or a remote HTTP endpoint.
pub trait EstimateService {
    /// Builds (or replaces) the sketch stored under `(dimension, period)`
    /// from raw elements.
    fn ingest(
        &mut self,
        dimension: &str,
        period: &str,
        algo: Algo,
        param: u32,
        elements: &[Vec<u8>],
    ) -> Result<(), AttackError>;

    /// Merged estimate over the sketches stored under `keys`, rounded to
    /// the service's granularity (at least `rounding` when supplied).
    fn estimate(
        &mut self,
        keys: &[(String, String)],
        rounding: Option<u64>,
    ) -> Result<u64, AttackError>;
}

/// Inputs of [`external_api_attack`].
#[derive(Debug, Clone)]
pub struct ExternalAttackConfig<'a> {
    /// Keys of the victim sketches, as `(dimension, period)` pairs.
    pub base_keys: &'a [(String, String)],
    /// Attacker-controlled key under which the probe sketch is ingested.
    pub probe_dimension: &'a str,
    pub probe_period: &'a str,
    /// Must match the victim sketches or the merge will be refused.
    pub algo: Algo,
    pub param: u32,
    /// Rounding to request from the service; the service may round coarser.
    pub rounding: Option<u64>,
}

/// Result of one probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalFinding {
    pub estimate_without_target: u64,
    pub estimate_with_target: u64,
    /// True when the probe did not move the estimate, which is evidence
    /// the target was already in the merged set.
    pub guess_member: bool,
}

/// Decides membership of `target` in the union behind `cfg.base_keys`
/// using nothing but rounded estimates.
pub fn external_api_attack(
    service: &mut dyn EstimateService,
    cfg: &ExternalAttackConfig<'_>,
    target: &[u8],
) -> Result<ExternalFinding, AttackError> {
    if cfg.base_keys.is_empty() {
        return Err(AttackError::Domain(
            "external attack needs at least one base key".into(),
        ));
    }
    service.ingest(
        cfg.probe_dimension,
        cfg.probe_period,
        cfg.algo,
        cfg.param,
        &[target.to_vec()],
    )?;
    let without = service.estimate(cfg.base_keys, cfg.rounding)?;
    let mut with_probe: Vec<(String, String)> = cfg.base_keys.to_vec();
    with_probe.push((cfg.probe_dimension.to_string(), cfg.probe_period.to_string()));
    let with = service.estimate(&with_probe, cfg.rounding)?;
    Ok(ExternalFinding {
        estimate_without_target: without,
        estimate_with_target: with,
        guess_member: with == without,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::Salt;
    use crate::sketch::Sketch;
    use std::collections::HashMap;

    /// Minimal in-memory service: full-precision merge, optional rounding.
    struct MapService {
        salt: Salt,
        sketches: HashMap<(String, String), Sketch>,
    }

    impl EstimateService for MapService {
        fn ingest(
            &mut self,
            dimension: &str,
            period: &str,
            algo: Algo,
            param: u32,
            elements: &[Vec<u8>],
        ) -> Result<(), AttackError> {
            let mut sk = Sketch::empty(algo, param, &self.salt)?;
            for e in elements {
                sk.add(e, &self.salt)?;
            }
            self.sketches
                .insert((dimension.to_string(), period.to_string()), sk);
            Ok(())
        }

        fn estimate(
            &mut self,
            keys: &[(String, String)],
            rounding: Option<u64>,
        ) -> Result<u64, AttackError> {
            let mut merged: Option<Sketch> = None;
            for key in keys {
                let sk = self
                    .sketches
                    .get(key)
                    .ok_or_else(|| AttackError::Service(format!("unknown key {key:?}")))?;
                merged = Some(match merged {
                    None => sk.clone(),
                    Some(m) => m.merged(sk)?,
                });
            }
            let est = merged.map(|m| m.estimate()).unwrap_or(0.0);
            let g = rounding.unwrap_or(1).max(1) as f64;
            Ok(((est / g).round_ties_even() * g).max(0.0) as u64)
        }
    }

    fn victim_service(n: usize) -> (MapService, Vec<(String, String)>) {
        let salt = Salt::default_public();
        let mut svc = MapService {
            salt,
            sketches: HashMap::new(),
        };
        let elements: Vec<Vec<u8>> = (0..n).map(|i| format!("user-{i}").into_bytes()).collect();
        svc.ingest("events", "2026-01-01", Algo::Kmv, 1 << 12, &elements)
            .unwrap();
        let keys = vec![("events".to_string(), "2026-01-01".to_string())];
        (svc, keys)
    }

    #[test]
    fn members_and_non_members_separate_at_full_precision() {
        let (mut svc, keys) = victim_service(500);
        let cfg = ExternalAttackConfig {
            base_keys: &keys,
            probe_dimension: "probe",
            probe_period: "2026-01-01",
            algo: Algo::Kmv,
            param: 1 << 12,
            rounding: None,
        };
        let member = external_api_attack(&mut svc, &cfg, b"user-17").unwrap();
        assert!(member.guess_member);
        assert_eq!(
            member.estimate_with_target,
            member.estimate_without_target
        );
        let outsider = external_api_attack(&mut svc, &cfg, b"visitor-99").unwrap();
        assert!(!outsider.guess_member);
        assert_eq!(
            outsider.estimate_with_target,
            outsider.estimate_without_target + 1,
            "KMV below k is exact, so the probe adds exactly one"
        );
    }

    #[test]
    fn coarse_rounding_hides_the_single_element_bump() {
        let (mut svc, keys) = victim_service(500);
        let cfg = ExternalAttackConfig {
            base_keys: &keys,
            probe_dimension: "probe",
            probe_period: "2026-01-01",
            algo: Algo::Kmv,
            param: 1 << 12,
            rounding: Some(100),
        };
        // 500 and 501 both round to 500: the non-member looks like a member.
        let outsider = external_api_attack(&mut svc, &cfg, b"visitor-99").unwrap();
        assert!(outsider.guess_member);
    }

    #[test]
    fn empty_base_keys_are_rejected() {
        let (mut svc, _) = victim_service(10);
        let cfg = ExternalAttackConfig {
            base_keys: &[],
            probe_dimension: "probe",
            probe_period: "2026-01-01",
            algo: Algo::Kmv,
            param: 1 << 12,
            rounding: None,
        };
        assert!(matches!(
            external_api_attack(&mut svc, &cfg, b"x"),
            Err(AttackError::Domain(_))
        ));
    }
}
