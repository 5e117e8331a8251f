//! Dyadic arithmetic: `pw`, aligned blocks, and interval decomposition.

use alloc::vec::Vec;

use thiserror::Error;

use crate::math::ceil_log2;
use crate::types::Day;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DyadicError {
    #[error("pw is undefined at 0")]
    Zero,
    #[error("day {day} outside [1, {horizon}]")]
    OutOfRange { day: Day, horizon: Day },
    #[error("empty interval [{start}, {end}]")]
    Empty { start: Day, end: Day },
}

/// Largest `k` such that `t` is a multiple of `2^k`.
pub fn pw(t: u64) -> Result<u32, DyadicError> {
    if t == 0 {
        Err(DyadicError::Zero)
    } else {
        Ok(t.trailing_zeros())
    }
}

/// The aligned block `[2^level (index-1) + 1, 2^level index]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicBlock {
    pub level: u32,
    pub index: u64,
}

impl DyadicBlock {
    pub fn new(level: u32, index: u64) -> Self {
        debug_assert!(index >= 1);
        DyadicBlock { level, index }
    }

    /// The block of `level` containing day `t`.
    pub fn containing(t: Day, level: u32) -> Self {
        DyadicBlock {
            level,
            index: ((t - 1) >> level) + 1,
        }
    }

    pub fn len(&self) -> u64 {
        1u64 << self.level
    }

    pub fn first(&self) -> Day {
        (self.index - 1) * self.len() + 1
    }

    pub fn last(&self) -> Day {
        self.index * self.len()
    }

    pub fn contains(&self, t: Day) -> bool {
        self.first() <= t && t <= self.last()
    }
}

/// Number of block levels used for a horizon: `ceil(log2 horizon)`, at least 1.
pub fn level_count(horizon: Day) -> u32 {
    ceil_log2(horizon).max(1)
}

/// The blocks effective on day `t`, one per level, lowest level first.
pub fn effective_blocks(t: Day, horizon: Day) -> Result<Vec<DyadicBlock>, DyadicError> {
    if t == 0 || t > horizon {
        return Err(DyadicError::OutOfRange { day: t, horizon });
    }
    Ok((0..level_count(horizon))
        .map(|a| DyadicBlock::containing(t, a))
        .collect())
}

/// Split `[start, end]` into disjoint aligned blocks, left to right.
///
/// Greedy: from the current left end take the largest aligned block that
/// still fits. The result has at most two blocks of any one length.
pub fn dyadic_decompose(
    start: Day,
    end: Day,
    horizon: Day,
) -> Result<Vec<DyadicBlock>, DyadicError> {
    if start == 0 || start > horizon {
        return Err(DyadicError::OutOfRange {
            day: start,
            horizon,
        });
    }
    if end > horizon {
        return Err(DyadicError::OutOfRange { day: end, horizon });
    }
    if end < start {
        return Err(DyadicError::Empty { start, end });
    }
    let mut out = Vec::new();
    let mut t = start;
    while t <= end {
        let offset = t - 1;
        let mut level = if offset == 0 {
            63
        } else {
            offset.trailing_zeros()
        };
        while level > 0 && (level >= 63 || t + (1u64 << level) - 1 > end) {
            level -= 1;
        }
        let block = DyadicBlock::containing(t, level);
        out.push(block);
        t = block.last() + 1;
    }
    Ok(out)
}
