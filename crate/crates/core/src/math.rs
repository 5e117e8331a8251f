//! Small numeric helpers shared by the learners.

/// `ln(sum(exp(xs)))` computed with a max shift.
pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.map(|x| libm::exp(x - max)).sum();
    max + libm::log(sum)
}

/// Index chosen by quantile `u` in `[0, 1)` from non-negative `weights`.
///
/// The heaviest entry (lowest index on ties) owns the bottom of the unit
/// interval; the rest are laid out in index order. A quantile of zero
/// therefore always selects the argmax. Returns `None` when every weight
/// is zero or the slice is empty.
pub(crate) fn pick_by_quantile(weights: &[f64], u: f64) -> Option<usize> {
    pick_by_quantile_with(weights.len(), |i| weights[i], u)
}

/// [`pick_by_quantile`] over `len` lazily evaluated weights. `weight` is
/// called at most three times per index.
pub(crate) fn pick_by_quantile_with(
    len: usize,
    weight: impl Fn(usize) -> f64,
    u: f64,
) -> Option<usize> {
    let mut total = 0.0;
    let mut heaviest: Option<(usize, f64)> = None;
    for i in 0..len {
        let w = weight(i);
        total += w;
        match heaviest {
            Some((_, hw)) if hw >= w => {}
            _ => heaviest = Some((i, w)),
        }
    }
    let (heaviest, hw) = heaviest?;
    if !(total > 0.0) {
        return None;
    }
    let mut target = u * total - hw;
    if target < 0.0 {
        return Some(heaviest);
    }
    let mut last_positive = heaviest;
    for i in 0..len {
        if i == heaviest {
            continue;
        }
        let w = weight(i);
        if w <= 0.0 {
            continue;
        }
        last_positive = i;
        target -= w;
        if target < 0.0 {
            return Some(i);
        }
    }
    // Rounding left a sliver past the end.
    Some(last_positive)
}

/// Floor of log2 for a positive integer.
pub(crate) fn floor_log2(x: u64) -> u32 {
    debug_assert!(x > 0);
    63 - x.leading_zeros()
}

/// Smallest `k` with `2^k >= x`.
pub(crate) fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        floor_log2(x - 1) + 1
    }
}
