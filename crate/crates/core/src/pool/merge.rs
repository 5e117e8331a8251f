//! Randomized pruning of pools.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::cover::filter;
use super::table::{EntryId, EntryTable};

/// Knobs of the merge procedure and the pool-size target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolConstants {
    /// Bernoulli rate of the size estimate and of the filter sample.
    pub sample_rate: f64,
    /// A merge stops once the estimated pool size (sampled count divided
    /// by `sample_rate`) is at most this.
    pub size_threshold: f64,
    /// Target bound on any sub-pool; exceeding it is logged, not enforced.
    pub pool_cap: usize,
    /// Maximal filter rounds per merge.
    pub merge_iters: usize,
}

impl PoolConstants {
    pub const DESK: PoolConstants = PoolConstants {
        sample_rate: 0.25,
        size_threshold: 8.0,
        pool_cap: 24,
        merge_iters: 16,
    };

    /// Polylogarithmic constants with `log = log2(n T)`. A sampled count of
    /// at most `log^5` at rate `log^-4` is an estimated size of `log^9`.
    pub fn paper(n: usize, horizon: u64) -> Self {
        let log = libm::log2((n as f64 * horizon as f64).max(2.0));
        PoolConstants {
            sample_rate: (1.0 / libm::pow(log, 4.0)).min(1.0),
            size_threshold: libm::pow(log, 9.0),
            pool_cap: (2.0 * libm::pow(log, 9.0)).min(usize::MAX as f64) as usize,
            merge_iters: libm::ceil(16.0 * log) as usize,
        }
    }
}

impl Default for PoolConstants {
    fn default() -> Self {
        Self::DESK
    }
}

/// Sum of fresh Bernoulli(`p`) bits, one per element of a set of size `len`.
pub fn estimate_size<R: RngCore + ?Sized>(len: usize, p: f64, rng: &mut R) -> usize {
    let p = p.clamp(0.0, 1.0);
    if p >= 1.0 {
        return len;
    }
    if p <= 0.0 {
        return 0;
    }
    (0..len).filter(|_| rng.gen_bool(p)).count()
}

/// Each element kept independently with probability `p` (fresh bits).
pub fn sample_subset<T: Copy, R: RngCore + ?Sized>(items: &[T], p: f64, rng: &mut R) -> Vec<T> {
    let p = p.clamp(0.0, 1.0);
    if p >= 1.0 {
        return items.to_vec();
    }
    if p <= 0.0 {
        return Vec::new();
    }
    items.iter().copied().filter(|_| rng.gen_bool(p)).collect()
}

/// Union of two disjoint pools, pruned by repeated sample-and-filter rounds
/// until the estimated size is small or the rounds run out.
pub fn merge<R: RngCore + ?Sized>(
    table: &EntryTable,
    a: &[EntryId],
    b: &[EntryId],
    constants: &PoolConstants,
    rng: &mut R,
) -> Vec<EntryId> {
    let mut q: Vec<EntryId> = a.iter().chain(b).copied().collect();
    for _ in 0..constants.merge_iters {
        let s = estimate_size(q.len(), constants.sample_rate, rng);
        if s as f64 <= constants.size_threshold * constants.sample_rate {
            break;
        }
        let f = sample_subset(&q, constants.sample_rate, rng);
        let mut kept = filter(table, &f, &q);
        for id in f {
            if !kept.contains(&id) {
                kept.push(id);
            }
        }
        // keep entry order stable for reproducibility
        kept.sort_unstable();
        q = kept;
    }
    q
}
