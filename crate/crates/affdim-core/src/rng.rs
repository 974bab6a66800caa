//! Seeded substreams and order-fixed reductions.
//!
//! Every stochastic routine derives one ChaCha stream per work item from
//! `(seed, index)`. Work items are therefore independent of thread count and
//! scheduling, and all reductions run in a fixed order, so identical inputs
//! produce bit-identical outputs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for work item `index` of the stream family identified by `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Maps `f` over `0..n` preserving index order. Runs on the rayon pool when
/// the `parallel` feature is enabled; output is identical either way.
pub fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Neumaier compensated summation. Order-sensitive like any float sum, so
/// callers must present terms in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator in its own order.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = KahanSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Index into a cumulative weight table: returns the smallest `i` with
/// `u < cum[i]`. `cum` must be non-decreasing with final entry equal to the
/// total mass; `u` must lie in `[0, total)`.
pub fn search_cumulative(cum: &[f64], u: f64) -> usize {
    let mut lo = 0usize;
    let mut hi = cum.len();
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if u < cum[mid] {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo.min(cum.len() - 1)
}

/// Cumulative weight table for [`search_cumulative`].
pub fn cumulative_weights(weights: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    cum
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_independent_of_order() {
        let a: Vec<u64> = (0..8).map(|i| substream(7, i).gen()).collect();
        let b: Vec<u64> = (0..8).rev().map(|i| substream(7, i).gen()).collect();
        let b_rev: Vec<u64> = b.into_iter().rev().collect();
        assert_eq!(a, b_rev);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-18);
        }
        assert_eq!(s.value(), 1.0 + 1000.0 * 1e-18);
    }

    #[test]
    fn cumulative_search_hits_each_bucket() {
        let cum = cumulative_weights(&[0.25, 0.25, 0.5]);
        assert_eq!(search_cumulative(&cum, 0.0), 0);
        assert_eq!(search_cumulative(&cum, 0.3), 1);
        assert_eq!(search_cumulative(&cum, 0.999), 2);
    }
}
