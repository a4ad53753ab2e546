//! Probabilistic-counting (PCSA / Flajolet-Martin) state: `k` 32-bit bitmaps.

use crate::hash::HashValue;

/// Normalization constant of the Flajolet-Martin estimator.
const PHI: f64 = 0.77351;

/// Bitmaps are 32 bits wide; rho values beyond that are clamped into the
/// last bit. At 32 leading positions the clamp fires with probability
/// ~2^-32 per element, well below anything the estimator can resolve.
const BITMAP_BITS: u8 = 32;

#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct Pcsa {
    pub(crate) log2k: u8,
    pub(crate) maps: Vec<u32>,
}

impl Pcsa {
    pub(crate) fn new(log2k: u8) -> Pcsa {
        Pcsa {
            log2k,
            maps: vec![0u32; 1 << log2k],
        }
    }

    fn slot(&self, h: HashValue) -> (usize, u32) {
        let bucket = h.bucket(self.log2k) as usize;
        let rho = h.rho(self.log2k).min(BITMAP_BITS);
        (bucket, 1u32 << (rho - 1))
    }

    pub(crate) fn insert(&mut self, h: HashValue) {
        let (bucket, bit) = self.slot(h);
        self.maps[bucket] |= bit;
    }

    pub(crate) fn ignores(&self, h: HashValue) -> bool {
        let (bucket, bit) = self.slot(h);
        self.maps[bucket] & bit != 0
    }

    pub(crate) fn merge(&mut self, other: &Pcsa) {
        for (a, b) in self.maps.iter_mut().zip(&other.maps) {
            *a |= b;
        }
    }

    /// `(k / phi) * 2^R` where `R` averages, per bitmap, the length of the
    /// initial run of 1-bits (the index of the lowest unset bit).
    pub(crate) fn estimate(&self) -> f64 {
        if self.maps.iter().all(|&m| m == 0) {
            return 0.0;
        }
        let k = self.maps.len() as f64;
        let run_sum: u32 = self.maps.iter().map(|m| m.trailing_ones()).sum();
        let mean_run = run_sum as f64 / k;
        (k / PHI) * mean_run.exp2()
    }

    /// P[a stream of size `n` has already set the exact bit `h` maps to].
    pub(crate) fn ignore_probability(&self, h: HashValue, n: f64) -> f64 {
        let rho = h.rho(self.log2k).min(BITMAP_BITS);
        // P[one element sets this (bucket, bit)]: 2^-log2k for the bucket,
        // 2^-rho for the exact rho (the clamped last bit absorbs the tail).
        let p_bit = if rho == BITMAP_BITS {
            (1.0f64 - rho as f64).exp2()
        } else {
            (-(rho as f64)).exp2()
        };
        let per_element = p_bit / self.maps.len() as f64;
        -(n * (-per_element).ln_1p()).exp_m1()
    }
}
