//! Sketch service: a thin policy layer over [`SketchStore`].
//!
//! Two API modes. RAW hands sketch bytes in and out. RESTRICTED refuses
//! any endpoint that moves sketch bytes, leaving ingest and rounded
//! estimates as the whole surface; combined with a coarse rounding
//! granularity this is the mitigation profile for estimate-difference
//! probing. Restricted mode can also audit every request, including
//! refused ones, as one JSON line each.

use crate::hash::Salt;
use crate::sketch::{Algo, Sketch, SketchError};
use crate::store::{parse_period, SketchStore, StoreError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

/// How much of the API is exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiMode {
    /// Sketch bytes may be uploaded and downloaded.
    Raw,
    /// Only ingest and rounded estimates; sketch bytes never leave.
    Restricted,
}

impl fmt::Display for ApiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApiMode::Raw => "raw",
            ApiMode::Restricted => "restricted",
        })
    }
}

impl FromStr for ApiMode {
    type Err = String;

    fn from_str(s: &str) -> Result<ApiMode, String> {
        match s {
            "raw" => Ok(ApiMode::Raw),
            "restricted" => Ok(ApiMode::Restricted),
            other => Err(format!("unknown api mode {other:?}: expected raw or restricted")),
        }
    }
}

/// Service policy: mode, estimate granularity, optional audit log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiPolicy {
    pub mode: ApiMode,
    /// Estimates are rounded to a multiple of this. Must be at least 1;
    /// 1 means full precision. A request may ask for coarser rounding but
    /// never finer.
    pub rounding: u64,
    /// Audit log path; lines are written in restricted mode only.
    pub audit_log_path: Option<PathBuf>,
}

impl Default for ApiPolicy {
    fn default() -> ApiPolicy {
        ApiPolicy {
            mode: ApiMode::Raw,
            rounding: 1,
            audit_log_path: None,
        }
    }
}

impl ApiPolicy {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.rounding == 0 {
            return Err(ServiceError::BadRequest(
                "policy rounding must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum ServiceError {
    /// The policy forbids this endpoint.
    PolicyViolation(String),
    BadRequest(String),
    Store(StoreError),
    Sketch(SketchError),
    Io(io::Error),
}

impl fmt::Display for ServiceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceError::PolicyViolation(m) => write!(f, "policy violation: {m}"),
            ServiceError::BadRequest(m) => write!(f, "bad request: {m}"),
            ServiceError::Store(e) => write!(f, "store error: {e}"),
            ServiceError::Sketch(e) => write!(f, "sketch error: {e}"),
            ServiceError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for ServiceError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ServiceError::Store(e) => Some(e),
            ServiceError::Sketch(e) => Some(e),
            ServiceError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> ServiceError {
        match e {
            StoreError::Sketch(e) => ServiceError::Sketch(e),
            other => ServiceError::Store(other),
        }
    }
}

impl From<SketchError> for ServiceError {
    fn from(e: SketchError) -> ServiceError {
        ServiceError::Sketch(e)
    }
}

impl From<io::Error> for ServiceError {
    fn from(e: io::Error) -> ServiceError {
        ServiceError::Io(e)
    }
}

/// One API call.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Request {
    /// Store pre-built sketch bytes (RAW mode only). The sketch must carry
    /// the service's salt fingerprint.
    PutSketch {
        dimension: String,
        period: String,
        sketch_bytes: Vec<u8>,
        overwrite: bool,
    },
    /// Fetch stored sketch bytes (RAW mode only).
    GetSketch { dimension: String, period: String },
    /// Merged, rounded estimate over the sketches under `keys`.
    Estimate {
        keys: Vec<(String, String)>,
        rounding: Option<u64>,
    },
    /// Build and store a sketch from raw elements (either mode).
    Ingest {
        dimension: String,
        period: String,
        algo: Algo,
        param: u32,
        elements: Vec<Vec<u8>>,
        overwrite: bool,
    },
}

impl Request {
    fn endpoint(&self) -> &'static str {
        match self {
            Request::PutSketch { .. } => "put_sketch",
            Request::GetSketch { .. } => "get_sketch",
            Request::Estimate { .. } => "estimate",
            Request::Ingest { .. } => "ingest",
        }
    }

    fn keys(&self) -> Vec<(String, String)> {
        match self {
            Request::PutSketch { dimension, period, .. }
            | Request::GetSketch { dimension, period }
            | Request::Ingest { dimension, period, .. } => {
                vec![(dimension.clone(), period.clone())]
            }
            Request::Estimate { keys, .. } => keys.clone(),
        }
    }
}

/// One API reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    Put,
    Sketch { sketch_bytes: Vec<u8> },
    Estimate { estimate: u64, merged: usize },
    Ingested { estimate: u64 },
}

/// Rounds `estimate` to the nearest multiple of `granularity`, ties to even.
pub fn round_to_granularity(estimate: f64, granularity: u64) -> u64 {
    let g = granularity.max(1) as f64;
    let rounded = (estimate / g).round_ties_even() * g;
    rounded.max(0.0) as u64
}

/// The policy-enforcing service.
#[derive(Debug)]
pub struct SketchService {
    store: SketchStore,
    salt: Salt,
    policy: ApiPolicy,
}

impl SketchService {
    pub fn new(store: SketchStore, salt: Salt, policy: ApiPolicy) -> Result<SketchService, ServiceError> {
        policy.validate()?;
        Ok(SketchService { store, salt, policy })
    }

    pub fn policy(&self) -> &ApiPolicy {
        &self.policy
    }

    pub fn salt(&self) -> &Salt {
        &self.salt
    }

    pub fn store(&self) -> &SketchStore {
        &self.store
    }

    /// Appends the audit line for `req`. Restricted mode only; failing to
    /// write the audit line fails the request itself.
    fn audit(&self, req: &Request) -> Result<(), ServiceError> {
        if self.policy.mode != ApiMode::Restricted {
            return Ok(());
        }
        let Some(path) = &self.policy.audit_log_path else {
            return Ok(());
        };
        let line = serde_json::json!({
            "ts": chrono::Utc::now().to_rfc3339(),
            "endpoint": req.endpoint(),
            "keys": req.keys(),
            "mode": self.policy.mode.to_string(),
        });
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{line}")?;
        Ok(())
    }

    /// Handles one request under the service policy.
    ///
    /// The audit line is written before the request is acted on, so refused
    /// and failed requests are audited too.
    pub fn handle(&mut self, req: &Request) -> Result<Response, ServiceError> {
        self.audit(req)?;
        match req {
            Request::PutSketch {
                dimension,
                period,
                sketch_bytes,
                overwrite,
            } => {
                self.require_raw("put_sketch")?;
                let period = parse_period(period)?;
                let sketch = Sketch::deserialize(sketch_bytes)?;
                if sketch.salt_fingerprint() != self.salt.fingerprint() {
                    return Err(SketchError::SaltMismatch {
                        expected: self.salt.fingerprint(),
                        got: sketch.salt_fingerprint(),
                    }
                    .into());
                }
                self.store.put(dimension, period, &sketch, *overwrite)?;
                Ok(Response::Put)
            }
            Request::GetSketch { dimension, period } => {
                self.require_raw("get_sketch")?;
                let period = parse_period(period)?;
                let rec = self.store.get(dimension, period)?;
                Ok(Response::Sketch {
                    sketch_bytes: rec.sketch.serialize(),
                })
            }
            Request::Estimate { keys, rounding } => {
                if keys.is_empty() {
                    return Err(ServiceError::BadRequest(
                        "estimate needs at least one key".into(),
                    ));
                }
                let mut merged: Option<Sketch> = None;
                for (dimension, period) in keys {
                    let period = parse_period(period)?;
                    let rec = self.store.get(dimension, period)?;
                    merged = Some(match merged {
                        None => rec.sketch,
                        Some(m) => m.merged(&rec.sketch)?,
                    });
                }
                let raw_estimate = merged.expect("keys is non-empty").estimate();
                let granularity = self.policy.rounding.max(rounding.unwrap_or(1));
                Ok(Response::Estimate {
                    estimate: round_to_granularity(raw_estimate, granularity),
                    merged: keys.len(),
                })
            }
            Request::Ingest {
                dimension,
                period,
                algo,
                param,
                elements,
                overwrite,
            } => {
                let period = parse_period(period)?;
                let sketch = self.store.ingest_elements(
                    dimension, period, *algo, *param, &self.salt, elements, *overwrite,
                )?;
                Ok(Response::Ingested {
                    estimate: round_to_granularity(sketch.estimate(), self.policy.rounding),
                })
            }
        }
    }

    fn require_raw(&self, endpoint: &str) -> Result<(), ServiceError> {
        if self.policy.mode == ApiMode::Raw {
            Ok(())
        } else {
            Err(ServiceError::PolicyViolation(format!(
                "{endpoint} moves sketch bytes and is disabled in restricted mode"
            )))
        }
    }
}

/// Adapter exposing a [`SketchService`] through the estimates-only
/// interface the external attack drives.
pub struct InProcessClient<'a> {
    pub service: &'a mut SketchService,
}

impl crate::attack::EstimateService for InProcessClient<'_> {
    fn ingest(
        &mut self,
        dimension: &str,
        period: &str,
        algo: Algo,
        param: u32,
        elements: &[Vec<u8>],
    ) -> Result<(), crate::attack::AttackError> {
        let req = Request::Ingest {
            dimension: dimension.to_string(),
            period: period.to_string(),
            algo,
            param,
            elements: elements.to_vec(),
            overwrite: true,
        };
        self.service
            .handle(&req)
            .map(|_| ())
            .map_err(|e| crate::attack::AttackError::Service(e.to_string()))
    }

    fn estimate(
        &mut self,
        keys: &[(String, String)],
        rounding: Option<u64>,
    ) -> Result<u64, crate::attack::AttackError> {
        let req = Request::Estimate {
            keys: keys.to_vec(),
            rounding,
        };
        match self.service.handle(&req) {
            Ok(Response::Estimate { estimate, .. }) => Ok(estimate),
            Ok(other) => Err(crate::attack::AttackError::Service(format!(
                "unexpected response {other:?}"
            ))),
            Err(e) => Err(crate::attack::AttackError::Service(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn service(mode: ApiMode, rounding: u64, audit: Option<PathBuf>) -> (SketchService, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let store = SketchStore::open(dir.path().join("store")).unwrap();
        let policy = ApiPolicy {
            mode,
            rounding,
            audit_log_path: audit,
        };
        let svc = SketchService::new(store, Salt::default_public(), policy).unwrap();
        (svc, dir)
    }

    fn elements(range: std::ops::Range<usize>) -> Vec<Vec<u8>> {
        range.map(|i| format!("user-{i}").into_bytes()).collect()
    }

    #[test]
    fn raw_mode_roundtrips_sketch_bytes() {
        let (mut svc, _dir) = service(ApiMode::Raw, 1, None);
        let salt = Salt::default_public();
        let mut sk = Sketch::hll(10, &salt).unwrap();
        for e in elements(0..400) {
            sk.add(&e, &salt).unwrap();
        }
        let bytes = sk.serialize();
        let put = Request::PutSketch {
            dimension: "d".into(),
            period: "2026-02-01".into(),
            sketch_bytes: bytes.clone(),
            overwrite: false,
        };
        assert_eq!(svc.handle(&put).unwrap(), Response::Put);
        let got = svc
            .handle(&Request::GetSketch {
                dimension: "d".into(),
                period: "2026-02-01".into(),
            })
            .unwrap();
        assert_eq!(got, Response::Sketch { sketch_bytes: bytes });
    }

    #[test]
    fn restricted_mode_refuses_sketch_byte_endpoints() {
        let (mut svc, _dir) = service(ApiMode::Restricted, 100, None);
        let salt = Salt::default_public();
        let sk = Sketch::hll(10, &salt).unwrap();
        let put = Request::PutSketch {
            dimension: "d".into(),
            period: "2026-02-01".into(),
            sketch_bytes: sk.serialize(),
            overwrite: false,
        };
        assert!(matches!(
            svc.handle(&put),
            Err(ServiceError::PolicyViolation(_))
        ));
        assert!(matches!(
            svc.handle(&Request::GetSketch {
                dimension: "d".into(),
                period: "2026-02-01".into(),
            }),
            Err(ServiceError::PolicyViolation(_))
        ));
        // Ingest and estimate still work.
        svc.handle(&Request::Ingest {
            dimension: "d".into(),
            period: "2026-02-01".into(),
            algo: Algo::Kmv,
            param: 1 << 10,
            elements: elements(0..150),
            overwrite: false,
        })
        .unwrap();
        let resp = svc
            .handle(&Request::Estimate {
                keys: vec![("d".into(), "2026-02-01".into())],
                rounding: None,
            })
            .unwrap();
        assert_eq!(resp, Response::Estimate { estimate: 200, merged: 1 });
    }

    #[test]
    fn put_refuses_foreign_salt() {
        let (mut svc, _dir) = service(ApiMode::Raw, 1, None);
        let foreign = Salt::new(b"foreign-salt-key-0123456789abcd0").unwrap();
        let sk = Sketch::hll(10, &foreign).unwrap();
        let put = Request::PutSketch {
            dimension: "d".into(),
            period: "2026-02-01".into(),
            sketch_bytes: sk.serialize(),
            overwrite: false,
        };
        assert!(matches!(
            svc.handle(&put),
            Err(ServiceError::Sketch(SketchError::SaltMismatch { .. }))
        ));
    }

    #[test]
    fn estimate_merges_rather_than_sums() {
        let (mut svc, _dir) = service(ApiMode::Raw, 1, None);
        for (dim, range) in [("a", 0..700), ("b", 350..1000)] {
            svc.handle(&Request::Ingest {
                dimension: dim.into(),
                period: "2026-03-01".into(),
                algo: Algo::Kmv,
                param: 1 << 11,
                elements: elements(range),
                overwrite: false,
            })
            .unwrap();
        }
        let resp = svc
            .handle(&Request::Estimate {
                keys: vec![
                    ("a".into(), "2026-03-01".into()),
                    ("b".into(), "2026-03-01".into()),
                ],
                rounding: None,
            })
            .unwrap();
        // KMV with k=2048 is exact below k: the union is 1000, not 1350.
        assert_eq!(resp, Response::Estimate { estimate: 1000, merged: 2 });
    }

    #[test]
    fn rounding_is_the_max_of_policy_and_request() {
        let (mut svc, _dir) = service(ApiMode::Raw, 1, None);
        for (dim, n) in [("a", 1042usize), ("b", 1050), ("c", 1150)] {
            svc.handle(&Request::Ingest {
                dimension: dim.into(),
                period: "2026-03-01".into(),
                algo: Algo::Kmv,
                param: 1 << 11,
                elements: elements(0..n),
                overwrite: false,
            })
            .unwrap();
        }
        let est = |svc: &mut SketchService, dim: &str, rounding: Option<u64>| {
            match svc
                .handle(&Request::Estimate {
                    keys: vec![(dim.into(), "2026-03-01".into())],
                    rounding,
                })
                .unwrap()
            {
                Response::Estimate { estimate, .. } => estimate,
                other => panic!("unexpected {other:?}"),
            }
        };
        assert_eq!(est(&mut svc, "a", Some(100)), 1000);
        assert_eq!(est(&mut svc, "b", Some(100)), 1000, "1050/100 = 10.5 rounds to even 10");
        assert_eq!(est(&mut svc, "c", Some(100)), 1200, "1150/100 = 11.5 rounds to even 12");
        assert_eq!(est(&mut svc, "a", None), 1042);

        // A coarse policy wins over a finer request.
        let (mut coarse, _dir2) = service(ApiMode::Restricted, 100, None);
        coarse
            .handle(&Request::Ingest {
                dimension: "a".into(),
                period: "2026-03-01".into(),
                algo: Algo::Kmv,
                param: 1 << 11,
                elements: elements(0..1042),
                overwrite: false,
            })
            .unwrap();
        let got = match coarse
            .handle(&Request::Estimate {
                keys: vec![("a".into(), "2026-03-01".into())],
                rounding: Some(10),
            })
            .unwrap()
        {
            Response::Estimate { estimate, .. } => estimate,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(got, 1000);
    }

    #[test]
    fn empty_estimate_and_zero_rounding_are_bad_requests() {
        let (mut svc, _dir) = service(ApiMode::Raw, 1, None);
        assert!(matches!(
            svc.handle(&Request::Estimate { keys: vec![], rounding: None }),
            Err(ServiceError::BadRequest(_))
        ));
        let dir = tempfile::tempdir().unwrap();
        let store = SketchStore::open(dir.path()).unwrap();
        let policy = ApiPolicy { mode: ApiMode::Raw, rounding: 0, audit_log_path: None };
        assert!(matches!(
            SketchService::new(store, Salt::default_public(), policy),
            Err(ServiceError::BadRequest(_))
        ));
    }

    #[test]
    fn restricted_mode_audits_every_request_including_failures() {
        let dir = tempfile::tempdir().unwrap();
        let audit = dir.path().join("audit.jsonl");
        let store = SketchStore::open(dir.path().join("store")).unwrap();
        let policy = ApiPolicy {
            mode: ApiMode::Restricted,
            rounding: 10,
            audit_log_path: Some(audit.clone()),
        };
        let mut svc = SketchService::new(store, Salt::default_public(), policy).unwrap();

        svc.handle(&Request::Ingest {
            dimension: "d".into(),
            period: "2026-03-01".into(),
            algo: Algo::Hll,
            param: 10,
            elements: elements(0..50),
            overwrite: false,
        })
        .unwrap();
        svc.handle(&Request::Estimate {
            keys: vec![("d".into(), "2026-03-01".into())],
            rounding: None,
        })
        .unwrap();
        // Refused by policy, still audited.
        let _ = svc.handle(&Request::GetSketch {
            dimension: "d".into(),
            period: "2026-03-01".into(),
        });
        // Fails in the store (unknown key), still audited.
        let _ = svc.handle(&Request::Estimate {
            keys: vec![("absent".into(), "2026-03-01".into())],
            rounding: None,
        });

        let text = fs::read_to_string(&audit).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["endpoint"], "ingest");
        assert_eq!(first["mode"], "restricted");
        assert_eq!(first["keys"][0][0], "d");
        assert!(first["ts"].as_str().unwrap().starts_with("20"));
        let third: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(third["endpoint"], "get_sketch");
    }

    #[test]
    fn raw_mode_writes_no_audit_lines() {
        let dir = tempfile::tempdir().unwrap();
        let audit = dir.path().join("audit.jsonl");
        let store = SketchStore::open(dir.path().join("store")).unwrap();
        let policy = ApiPolicy {
            mode: ApiMode::Raw,
            rounding: 1,
            audit_log_path: Some(audit.clone()),
        };
        let mut svc = SketchService::new(store, Salt::default_public(), policy).unwrap();
        svc.handle(&Request::Ingest {
            dimension: "d".into(),
            period: "2026-03-01".into(),
            algo: Algo::Hll,
            param: 10,
            elements: elements(0..5),
            overwrite: false,
        })
        .unwrap();
        assert!(!audit.exists());
    }

    #[test]
    fn restricted_responses_carry_only_numbers() {
        let (mut svc, _dir) = service(ApiMode::Restricted, 10, None);
        svc.handle(&Request::Ingest {
            dimension: "d".into(),
            period: "2026-03-01".into(),
            algo: Algo::Hll,
            param: 12,
            elements: elements(0..500),
            overwrite: false,
        })
        .unwrap();
        let resp = svc
            .handle(&Request::Estimate {
                keys: vec![("d".into(), "2026-03-01".into())],
                rounding: None,
            })
            .unwrap();
        let value = serde_json::to_value(&resp).unwrap();
        let obj = value.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(|s| s.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["estimate", "kind", "merged"]);
        assert!(obj["estimate"].is_u64());
    }

    #[test]
    fn in_process_client_drives_the_external_attack() {
        use crate::attack::{external_api_attack, ExternalAttackConfig};
        let (mut svc, _dir) = service(ApiMode::Raw, 1, None);
        svc.handle(&Request::Ingest {
            dimension: "victims".into(),
            period: "2026-03-01".into(),
            algo: Algo::Kmv,
            param: 1 << 11,
            elements: elements(0..800),
            overwrite: false,
        })
        .unwrap();
        let keys = vec![("victims".to_string(), "2026-03-01".to_string())];
        let mut client = InProcessClient { service: &mut svc };
        let cfg = ExternalAttackConfig {
            base_keys: &keys,
            probe_dimension: "probe",
            probe_period: "2026-03-01",
            algo: Algo::Kmv,
            param: 1 << 11,
            rounding: None,
        };
        let member = external_api_attack(&mut client, &cfg, b"user-5").unwrap();
        assert!(member.guess_member);
        let outsider = external_api_attack(&mut client, &cfg, b"stranger").unwrap();
        assert!(!outsider.guess_member);
    }
}
