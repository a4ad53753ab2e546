//! Shared register array for LogLog and HyperLogLog, plus their estimators.
//!
//! Both sketches keep `2^p` one-byte registers; register `b` holds the
//! largest rho seen among elements hashing into bucket `b`. They differ only
//! in how they turn registers into an estimate: LogLog uses the geometric
//! mean (an arithmetic mean in the exponent), HyperLogLog the harmonic mean
//! plus a linear-counting correction for small cardinalities.

use crate::hash::HashValue;

/// Asymptotic LogLog normalization constant. The exact constant depends
/// (weakly) on the register count and this value is only promised for
/// p >= 6; below that the estimator carries a visible bias.
const LOGLOG_ALPHA: f64 = 0.39701;

#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct Registers {
    pub(crate) p: u8,
    /// `2^p` registers, each in `[0, 65 - p]` (0 = bucket never hit).
    pub(crate) regs: Vec<u8>,
}

impl Registers {
    pub(crate) fn new(p: u8) -> Registers {
        Registers {
            p,
            regs: vec![0u8; 1usize << p],
        }
    }

    pub(crate) fn insert(&mut self, h: HashValue) {
        let bucket = h.bucket(self.p) as usize;
        let rho = h.rho(self.p);
        if self.regs[bucket] < rho {
            self.regs[bucket] = rho;
        }
    }

    pub(crate) fn ignores(&self, h: HashValue) -> bool {
        self.regs[h.bucket(self.p) as usize] >= h.rho(self.p)
    }

    pub(crate) fn merge(&mut self, other: &Registers) {
        for (a, &b) in self.regs.iter_mut().zip(&other.regs) {
            if *a < b {
                *a = b;
            }
        }
    }

    /// P[a stream of size `n` drives this bucket's register to at least the
    /// rho of `h`], i.e. the chance a fresh sketch of that size ignores `h`.
    ///
    /// One element lands in the bucket with rho >= r with probability
    /// 2^-p * 2^-(r-1).
    pub(crate) fn ignore_probability(&self, h: HashValue, n: f64) -> f64 {
        let r = h.rho(self.p) as f64;
        let per_element = (1.0 - self.p as f64 - r).exp2();
        -(n * (-per_element).ln_1p()).exp_m1()
    }
}

/// LogLog: `alpha * m * 2^(mean register)`.
pub(crate) fn loglog_estimate(r: &Registers) -> f64 {
    if r.regs.iter().all(|&x| x == 0) {
        return 0.0;
    }
    let m = r.regs.len() as f64;
    let sum: u32 = r.regs.iter().map(|&x| x as u32).sum();
    LOGLOG_ALPHA * m * (sum as f64 / m).exp2()
}

/// HyperLogLog: bias-corrected harmonic mean, with linear counting when the
/// raw estimate is small and empty buckets remain.
pub(crate) fn hll_estimate(r: &Registers) -> f64 {
    let m = r.regs.len() as f64;
    let mut harmonic = 0.0f64;
    let mut zeros = 0u32;
    for &x in &r.regs {
        harmonic += (-(x as f64)).exp2();
        if x == 0 {
            zeros += 1;
        }
    }
    let raw = hll_alpha(r.regs.len()) * m * m / harmonic;
    if raw <= 2.5 * m && zeros > 0 {
        // Linear counting: occupancy of `m` cells under uniform throws.
        m * (m / zeros as f64).ln()
    } else {
        raw
    }
}

/// Bias-correction constant for `m` registers. With 64-bit hashes there is
/// no large-range correction to apply.
fn hll_alpha(m: usize) -> f64 {
    match m {
        16 => 0.673,
        32 => 0.697,
        64 => 0.709,
        _ => 0.7213 / (1.0 + 1.079 / m as f64),
    }
}
