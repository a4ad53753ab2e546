//! Binary sketch format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SKP1"
//! 4       1     version, currently 1
//! 5       1     algorithm (1 = KMV, 2 = PCSA, 3 = LOGLOG, 4 = HLL)
//! 6       2     parameter: k for KMV/PCSA (0 encodes k = 65536), p otherwise
//! 8       8     salt fingerprint
//! 16      4     payload length in bytes
//! 20      ...   payload
//! ```
//!
//! Payloads: KMV is a u32 count followed by that many u64 hashes in strictly
//! ascending order; PCSA is `k` u32 bitmaps; LogLog and HLL are `2^p` raw
//! register bytes. Anything malformed (bad magic, unknown version or
//! algorithm, truncation, wrong payload length, out-of-range contents,
//! trailing bytes) fails with a [`FormatError`].

use super::kmv::Kmv;
use super::pcsa::Pcsa;
use super::registers::Registers;
use super::{Algo, Sketch, SketchError, State};

pub(crate) const MAGIC: [u8; 4] = *b"SKP1";
pub(crate) const VERSION: u8 = 1;
pub(crate) const HEADER_LEN: usize = 20;

/// Ways a byte stream can fail to be a sketch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatError {
    BadMagic([u8; 4]),
    BadVersion(u8),
    UnknownAlgo(u8),
    /// Fewer bytes than the structure requires.
    Truncated { needed: usize, got: usize },
    /// The payload length field disagrees with the bytes present.
    LengthMismatch { declared: u32, actual: usize },
    /// Structurally sound but semantically invalid contents.
    Invalid(String),
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormatError::BadMagic(m) => write!(f, "bad magic {m:02x?}"),
            FormatError::BadVersion(v) => write!(f, "unsupported version {v}"),
            FormatError::UnknownAlgo(a) => write!(f, "unknown algorithm code {a}"),
            FormatError::Truncated { needed, got } => {
                write!(f, "truncated: needed {needed} bytes, got {got}")
            }
            FormatError::LengthMismatch { declared, actual } => {
                write!(f, "payload length field says {declared}, found {actual} bytes")
            }
            FormatError::Invalid(msg) => write!(f, "invalid contents: {msg}"),
        }
    }
}

impl std::error::Error for FormatError {}

fn wire_param(sk: &Sketch) -> u16 {
    // k = 65536 is representable as a parameter but not as a u16; it is
    // encoded as 0, which no valid k or p uses.
    (sk.param() & 0xffff) as u16
}

fn param_from_wire(algo: Algo, raw: u16) -> u32 {
    match algo {
        Algo::Kmv | Algo::Pcsa if raw == 0 => 1 << 16,
        _ => raw as u32,
    }
}

pub(crate) fn serialize(sk: &Sketch) -> Vec<u8> {
    let payload = match &sk.state {
        State::Kmv(s) => {
            let mut p = Vec::with_capacity(4 + 8 * s.hashes.len());
            p.extend_from_slice(&(s.hashes.len() as u32).to_le_bytes());
            for h in &s.hashes {
                p.extend_from_slice(&h.to_le_bytes());
            }
            p
        }
        State::Pcsa(s) => {
            let mut p = Vec::with_capacity(4 * s.maps.len());
            for m in &s.maps {
                p.extend_from_slice(&m.to_le_bytes());
            }
            p
        }
        State::LogLog(r) | State::Hll(r) => r.regs.clone(),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(sk.algo().code());
    out.extend_from_slice(&wire_param(sk).to_le_bytes());
    out.extend_from_slice(&sk.salt_fingerprint.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub(crate) fn deserialize(bytes: &[u8]) -> Result<Sketch, SketchError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            needed: HEADER_LEN,
            got: bytes.len(),
        }
        .into());
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic).into());
    }
    if bytes[4] != VERSION {
        return Err(FormatError::BadVersion(bytes[4]).into());
    }
    let algo = Algo::from_code(bytes[5]).ok_or(FormatError::UnknownAlgo(bytes[5]))?;
    let param = param_from_wire(algo, u16::from_le_bytes(bytes[6..8].try_into().unwrap()));
    let fingerprint = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let declared = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != declared as usize {
        return Err(FormatError::LengthMismatch {
            declared,
            actual: payload.len(),
        }
        .into());
    }

    let state = match algo {
        Algo::Kmv => {
            super::validate_kmv_k(param)?;
            if payload.len() < 4 {
                return Err(FormatError::Truncated {
                    needed: HEADER_LEN + 4,
                    got: bytes.len(),
                }
                .into());
            }
            let count = u32::from_le_bytes(payload[0..4].try_into().unwrap()) as usize;
            if count > param as usize {
                return Err(FormatError::Invalid(format!(
                    "KMV count {count} exceeds k = {param}"
                ))
                .into());
            }
            let body = &payload[4..];
            if body.len() != 8 * count {
                return Err(FormatError::LengthMismatch {
                    declared,
                    actual: payload.len(),
                }
                .into());
            }
            let mut hashes = Vec::with_capacity(count);
            for chunk in body.chunks_exact(8) {
                let h = u64::from_le_bytes(chunk.try_into().unwrap());
                if let Some(&last) = hashes.last() {
                    if h <= last {
                        return Err(FormatError::Invalid(
                            "KMV hashes must be strictly ascending".into(),
                        )
                        .into());
                    }
                }
                hashes.push(h);
            }
            State::Kmv(Kmv { k: param, hashes })
        }
        Algo::Pcsa => {
            let log2k = super::validate_pcsa_k(param)?;
            if payload.len() != 4 * param as usize {
                return Err(FormatError::Invalid(format!(
                    "PCSA payload must be {} bytes, got {}",
                    4 * param,
                    payload.len()
                ))
                .into());
            }
            let maps = payload
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            State::Pcsa(Pcsa { log2k, maps })
        }
        Algo::LogLog | Algo::Hll => {
            let p = super::param_as_p(param)?;
            super::validate_p(p)?;
            let m = 1usize << p;
            if payload.len() != m {
                return Err(FormatError::Invalid(format!(
                    "register payload must be {m} bytes, got {}",
                    payload.len()
                ))
                .into());
            }
            let max_rho = 65 - p;
            if let Some(bad) = payload.iter().find(|&&r| r > max_rho) {
                return Err(FormatError::Invalid(format!(
                    "register value {bad} exceeds maximum rho {max_rho} for p = {p}"
                ))
                .into());
            }
            let regs = Registers {
                p,
                regs: payload.to_vec(),
            };
            if algo == Algo::LogLog {
                State::LogLog(regs)
            } else {
                State::Hll(regs)
            }
        }
    };

    Ok(Sketch {
        state,
        salt_fingerprint: fingerprint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::Salt;

    #[test]
    fn empty_hll_p4_is_header_plus_sixteen_zero_bytes() {
        let salt = Salt::default_public();
        let sk = Sketch::hll(4, &salt).unwrap();
        let bytes = sk.serialize();
        assert_eq!(bytes.len(), HEADER_LEN + 16);
        assert_eq!(&bytes[0..4], b"SKP1");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 4); // HLL code
        assert_eq!(u16::from_le_bytes(bytes[6..8].try_into().unwrap()), 4);
        assert_eq!(
            u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            salt.fingerprint()
        );
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 16);
        assert!(bytes[20..].iter().all(|&b| b == 0));
    }

    #[test]
    fn round_trips_all_algorithms() {
        let salt = Salt::default_public();
        let mut sketches = vec![
            Sketch::kmv(32, &salt).unwrap(),
            Sketch::pcsa(16, &salt).unwrap(),
            Sketch::loglog(5, &salt).unwrap(),
            Sketch::hll(6, &salt).unwrap(),
        ];
        for sk in &mut sketches {
            for i in 0..500 {
                sk.add(format!("rt-{i}").as_bytes(), &salt).unwrap();
            }
            let bytes = sk.serialize();
            let back = Sketch::deserialize(&bytes).unwrap();
            assert_eq!(&back, &*sk);
            assert_eq!(back.serialize(), bytes, "round-trip must be byte-stable");
        }
    }

    #[test]
    fn truncation_and_garbage_are_format_errors() {
        let salt = Salt::default_public();
        let mut sk = Sketch::kmv(8, &salt).unwrap();
        sk.add(b"a", &salt).unwrap();
        let bytes = sk.serialize();

        for cut in [0, 3, 10, bytes.len() - 1] {
            let err = Sketch::deserialize(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, SketchError::Format(_)), "cut={cut}: {err}");
        }
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            Sketch::deserialize(&wrong_magic),
            Err(SketchError::Format(FormatError::BadMagic(_)))
        ));
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            Sketch::deserialize(&wrong_version),
            Err(SketchError::Format(FormatError::BadVersion(9)))
        ));
        let mut wrong_algo = bytes.clone();
        wrong_algo[5] = 200;
        assert!(matches!(
            Sketch::deserialize(&wrong_algo),
            Err(SketchError::Format(FormatError::UnknownAlgo(200)))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            Sketch::deserialize(&extra),
            Err(SketchError::Format(FormatError::LengthMismatch { .. }))
        ));
    }

    #[test]
    fn out_of_range_register_is_rejected() {
        let salt = Salt::default_public();
        let sk = Sketch::hll(4, &salt).unwrap();
        let mut bytes = sk.serialize();
        bytes[HEADER_LEN] = 62; // max rho for p=4 is 61
        assert!(matches!(
            Sketch::deserialize(&bytes),
            Err(SketchError::Format(FormatError::Invalid(_)))
        ));
        bytes[HEADER_LEN] = 61;
        assert!(Sketch::deserialize(&bytes).is_ok());
    }

    #[test]
    fn unsorted_kmv_payload_is_rejected() {
        let salt = Salt::default_public();
        let mut sk = Sketch::kmv(8, &salt).unwrap();
        sk.add(b"a", &salt).unwrap();
        sk.add(b"b", &salt).unwrap();
        let mut bytes = sk.serialize();
        // Swap the two stored hashes.
        let (lo, hi) = (HEADER_LEN + 4, HEADER_LEN + 12);
        let mut tmp = [0u8; 8];
        tmp.copy_from_slice(&bytes[lo..lo + 8]);
        let hi_bytes: Vec<u8> = bytes[hi..hi + 8].to_vec();
        bytes[lo..lo + 8].copy_from_slice(&hi_bytes);
        bytes[hi..hi + 8].copy_from_slice(&tmp);
        assert!(matches!(
            Sketch::deserialize(&bytes),
            Err(SketchError::Format(FormatError::Invalid(_)))
        ));
    }

    #[test]
    fn kmv_k_65536_wire_encoding() {
        let salt = Salt::default_public();
        let sk = Sketch::kmv(1 << 16, &salt).unwrap();
        let bytes = sk.serialize();
        assert_eq!(u16::from_le_bytes(bytes[6..8].try_into().unwrap()), 0);
        let back = Sketch::deserialize(&bytes).unwrap();
        assert_eq!(back.param(), 1 << 16);
    }
}
