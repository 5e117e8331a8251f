//! Hedging over a fixed, finite set of arms.

mod group;
mod learner;
mod mwu;
mod squint;

pub use group::{group_partition, GroupError, GroupedLearner};
pub use learner::{MwuLearner, SquintHedge};
pub use mwu::{default_eta, MwuState};
pub use squint::{GridError, SquintGrid, SquintStats, DEFAULT_GRID_POINTS};
