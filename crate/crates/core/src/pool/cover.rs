//! The covering test used to prune pools.
//!
//! Order a set `F` by entry day. For an entry `j`, split `[E_j, now)` at the
//! entry days of the members of `F` that entered after `j`. The benchmark
//! is the sum, over these segments, of the smallest loss any member of `F`
//! suffered on the segment. `j` is covered when its own loss since entry is
//! at least the benchmark minus one.
//!
//! Only members that were already in the pool at a segment's start have an
//! observable loss on it; the others count as `+inf`. A segment on which no
//! member is observable makes the benchmark `+inf`. Members that entered on
//! the same day as `j` are ordered before it, and segments of zero length
//! contribute nothing.

use alloc::vec::Vec;

use super::table::{EntryId, EntryTable};
use crate::types::Day;

/// Segment boundaries for `j` against `f`: `E_j`, the distinct later entry
/// days in `f`, and now.
fn boundaries(table: &EntryTable, f: &[EntryId], j: EntryId) -> Vec<Day> {
    let ej = table.entry(j).entered;
    let mut days: Vec<Day> = f
        .iter()
        .map(|&i| table.entry(i).entered)
        .filter(|&d| d > ej)
        .collect();
    days.push(ej);
    days.push(table.clock());
    days.sort_unstable();
    days.dedup();
    days
}

pub fn covering_benchmark(table: &EntryTable, f: &[EntryId], j: EntryId) -> f64 {
    if f.is_empty() {
        return f64::INFINITY;
    }
    let cuts = boundaries(table, f, j);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let best = f
            .iter()
            .map(|&i| table.segment(i, w[0], w[1]))
            .fold(f64::INFINITY, f64::min);
        if best == f64::INFINITY {
            return f64::INFINITY;
        }
        total += best;
    }
    total
}

pub fn is_covered(table: &EntryTable, f: &[EntryId], j: EntryId) -> bool {
    let own = table.entry(j).cum;
    own >= covering_benchmark(table, f, j) - 1.0
}

/// Entries of `q` not covered by `f`. Every entry is judged against the same
/// `f`, so removals do not cascade.
pub fn filter(table: &EntryTable, f: &[EntryId], q: &[EntryId]) -> Vec<EntryId> {
    q.iter()
        .copied()
        .filter(|&j| !is_covered(table, f, j))
        .collect()
}
