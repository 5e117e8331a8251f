//! Pools of sampled experts with pairwise loss snapshots.

mod baseline;
mod cover;
mod merge;
mod table;

pub use baseline::{default_epoch_len, Baseline, SubPools};
pub use cover::{covering_benchmark, filter, is_covered};
pub use merge::{estimate_size, merge, sample_subset, PoolConstants};
pub use table::{EntryId, EntryTable, PoolEntry};
