//! K-minimum-values state: the `k` smallest distinct element hashes.

const TWO_POW_64: f64 = 18446744073709551616.0;

#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct Kmv {
    pub(crate) k: u32,
    /// Sorted ascending, distinct, at most `k` entries.
    pub(crate) hashes: Vec<u64>,
}

impl Kmv {
    pub(crate) fn new(k: u32) -> Kmv {
        Kmv {
            k,
            hashes: Vec::new(),
        }
    }

    fn full(&self) -> bool {
        self.hashes.len() == self.k as usize
    }

    pub(crate) fn insert(&mut self, h: u64) {
        match self.hashes.binary_search(&h) {
            Ok(_) => {} // already stored
            Err(pos) => {
                if !self.full() {
                    self.hashes.insert(pos, h);
                } else if pos < self.hashes.len() {
                    // h displaces the current k-th minimum.
                    self.hashes.insert(pos, h);
                    self.hashes.pop();
                }
            }
        }
    }

    pub(crate) fn ignores(&self, h: u64) -> bool {
        match self.hashes.binary_search(&h) {
            Ok(_) => true,
            Err(pos) => self.full() && pos == self.hashes.len(),
        }
    }

    pub(crate) fn merge(&mut self, other: &Kmv) {
        for &h in &other.hashes {
            self.insert(h);
        }
    }

    /// Exact count while below capacity; otherwise `(k - 1) / v` with `v` the
    /// k-th smallest hash mapped into (0, 1].
    pub(crate) fn estimate(&self) -> f64 {
        if !self.full() {
            return self.hashes.len() as f64;
        }
        let kth = *self.hashes.last().expect("full sketch is non-empty");
        let v = (kth as f64 + 1.0) / TWO_POW_64;
        (self.k as f64 - 1.0) / v
    }

    /// P[a fresh stream of size `n` leaves this exact hash unabsorbed].
    ///
    /// Below capacity every new hash is absorbed, so an ignored hash must
    /// already be stored; the chance a non-member collides into it is n/2^64.
    /// At capacity a hash above the k-th minimum is always ignored.
    pub(crate) fn ignore_probability(&self, h: u64, n: f64) -> f64 {
        let collision = (n * (1.0 / TWO_POW_64)).min(1.0);
        if !self.full() {
            return collision;
        }
        let kth = *self.hashes.last().expect("full sketch is non-empty");
        if h > kth {
            1.0
        } else {
            collision
        }
    }
}
