//! Memory-bounded online learning with expert advice.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only computation:
//! learners, loss-stream adversaries, regret and memory accounting, and the
//! day loop that wires them together. File formats, the command line and
//! parallel experiment suites live in the `lowmem-harness` crate.
//!
//! Layout, bottom-up:
//!
//! * [`types`], [`dyadic`], [`ledger`], [`meter`], [`rng`], [`config`]: the
//!   shared data model (experts, days, regret, word-level memory metering,
//!   seeded randomness, dyadic arithmetic, validated game parameters).
//! * [`hedge`]: exponential weights, Squint weighting and the grouping
//!   wrapper.
//! * [`interval`]: interval-regret learner over dyadic meta-experts.
//! * [`monocarpic`]: learner over experts that wake once and die.
//! * [`pool`]: the pool with pairwise loss snapshots, covering test, merge,
//!   and the epoch-based baseline learner.
//! * [`oblivious`]: multi-thread pool maintenance with inheritance, driving
//!   a monocarpic learner.
//! * [`adaptive`]: fresh-sample threads plus observe-then-commit pools for
//!   adaptive adversaries.
//! * [`adversary`]: synthetic and lower-bound loss generators.
//! * [`game`]: the learner/adversary protocol and traces.
//! * [`factory`]: learners and adversaries from a validated configuration.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adaptive;
pub mod adversary;
pub mod config;
pub mod dyadic;
pub mod factory;
pub mod game;
pub mod hedge;
pub mod interval;
pub mod ledger;
pub mod meter;
pub mod monocarpic;
pub mod oblivious;
pub mod pool;
pub mod rng;
pub mod types;

mod math;

pub use config::{
    AdversaryKind, AlgorithmKind, ConfigError, ConstantMode, Constants, GameConfig, Resolved,
};
pub use factory::{build_adversary, build_learner, run_config, RunError};
pub use game::{run_game, Adversary, GameError, GameTrace, Learner, TraceRow};
pub use ledger::RegretLedger;
pub use meter::{MemoryMeter, MemoryReport, Metered};
pub use rng::RandomnessSource;
pub use types::{Action, Day, DayLoss, ExpertId, LossError};
