//! Interval regret over a fixed arm set.
//!
//! For each level `a` there is one dyadic block of length `2^a` containing
//! the current day. Each such block runs its own exponential-weights copy
//! over the arms, started fresh when the block begins, and is a
//! meta-expert for a Squint layer that picks whose proposal to play. Blocks
//! that are not currently effective would be charged the mixture loss,
//! i.e. zero excess, so their statistics never change and only the `L`
//! effective blocks have to be stored.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::dyadic::level_count;
use crate::game::Learner;
use crate::hedge::{MwuState, SquintGrid, SquintStats};
use crate::math::pick_by_quantile;
use crate::meter::{MemoryReport, Metered};
use crate::rng::{RandomnessSource, StreamRng};
use crate::types::{Action, Day, DayLoss, ExpertId};

#[derive(Debug, Clone)]
struct Level {
    stats: SquintStats,
    mwu: MwuState,
    proposal: usize,
}

/// Block-level rate for a block of length `2^level`.
fn level_eta(arms: usize, level: u32) -> f64 {
    let k = arms.max(2) as f64;
    libm::sqrt(libm::log(k) / (1u64 << level) as f64)
}

#[derive(Debug, Clone)]
pub struct IntervalRegret {
    arms: usize,
    horizon: Day,
    grid: Arc<SquintGrid>,
    // Days elapsed since the last (re)start.
    day: Day,
    levels: Vec<Level>,
    proposed: bool,
}

impl IntervalRegret {
    pub fn new(arms: usize, horizon: Day, grid: Arc<SquintGrid>) -> Self {
        let levels = (0..level_count(horizon))
            .map(|a| Level {
                stats: SquintStats::default(),
                mwu: MwuState::new(arms, level_eta(arms, a)),
                proposal: 0,
            })
            .collect();
        IntervalRegret {
            arms,
            horizon,
            grid,
            day: 0,
            levels,
            proposed: false,
        }
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn horizon(&self) -> Day {
        self.horizon
    }

    /// Days observed since the last restart.
    pub fn day(&self) -> Day {
        self.day
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn restart(&mut self) {
        self.day = 0;
        self.proposed = false;
        for l in &mut self.levels {
            l.stats = SquintStats::default();
            l.mwu.reset();
        }
    }

    /// Squint statistics of the block currently effective at each level.
    pub fn level_stats(&self) -> Vec<SquintStats> {
        self.levels.iter().map(|l| l.stats).collect()
    }

    /// Sampling distribution over levels for the current statistics.
    pub fn level_probabilities(&self) -> Vec<f64> {
        let logs: Vec<f64> = self
            .levels
            .iter()
            .map(|l| self.grid.log_weight(&l.stats))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|x| libm::exp(x - max)).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 && total.is_finite() {
            w.iter_mut().for_each(|x| *x /= total);
        } else {
            log::warn!("interval regret: all block weights vanished, using uniform");
            let u = 1.0 / w.len() as f64;
            w.iter_mut().for_each(|x| *x = u);
        }
        w
    }

    /// Each level's proposal for the current day (valid after `propose`).
    pub fn proposals(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.proposal).collect()
    }

    /// Start the next day and pick an arm; `None` when there are no arms.
    pub fn propose<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Option<usize> {
        if self.arms == 0 {
            self.proposed = true;
            return None;
        }
        let t = self.day + 1;
        for (a, l) in self.levels.iter_mut().enumerate() {
            if (t - 1).is_multiple_of(1u64 << a) {
                // a new block starts at this level
                l.stats = SquintStats::default();
                l.mwu.reset();
            }
            l.proposal = l.mwu.sample(rng).unwrap_or(0);
        }
        self.proposed = true;
        let p = self.level_probabilities();
        let u: f64 = if p.len() > 1 { rng.gen() } else { 0.0 };
        let a = pick_by_quantile(&p, u).unwrap_or(0);
        Some(self.levels[a].proposal)
    }

    /// Finish the day with every arm's loss. Returns the mixture loss, the
    /// expected loss of the played arm.
    pub fn observe(&mut self, losses: &[f64]) -> f64 {
        debug_assert_eq!(losses.len(), self.arms);
        debug_assert!(self.proposed, "observe without propose");
        self.proposed = false;
        self.day += 1;
        if self.arms == 0 {
            return 1.0;
        }
        let p = self.level_probabilities();
        // Offset by the smallest proposal loss so a consensus day gives
        // exactly zero excess.
        let base = self
            .levels
            .iter()
            .map(|l| losses[l.proposal])
            .fold(f64::INFINITY, f64::min);
        let mix = base
            + self
                .levels
                .iter()
                .zip(&p)
                .map(|(l, q)| q * (losses[l.proposal] - base))
                .sum::<f64>();
        for l in &mut self.levels {
            l.stats.push(mix - losses[l.proposal]);
            l.mwu.update_from(losses);
        }
        mix
    }

    /// Stored scalars: per level the Squint pair, the proposal and one
    /// accumulator per arm (the block rate is a function of the level), plus
    /// the day counter.
    pub fn words(&self) -> usize {
        self.levels.len() * (SquintStats::WORDS + 1 + self.arms) + 1
    }
}

/// [`IntervalRegret`] over all `n` experts as a stand-alone learner.
#[derive(Debug, Clone)]
pub struct IntervalLearner {
    inner: IntervalRegret,
    rng: StreamRng,
}

impl IntervalLearner {
    pub fn new(n: usize, horizon: Day, grid: Arc<SquintGrid>, source: &RandomnessSource) -> Self {
        IntervalLearner {
            inner: IntervalRegret::new(n, horizon, grid),
            rng: source.fork("interval").rng(),
        }
    }

    pub fn inner(&self) -> &IntervalRegret {
        &self.inner
    }
}

impl Metered for IntervalLearner {
    fn report_memory(&self, out: &mut MemoryReport) {
        out.add("interval", self.inner.words());
    }
}

impl Learner for IntervalLearner {
    fn experts(&self) -> usize {
        self.inner.arms()
    }

    fn act(&mut self, _day: Day) -> Action {
        match self.inner.propose(&mut self.rng) {
            Some(i) => Action::Play(ExpertId::from_index(i)),
            None => Action::Abstain,
        }
    }

    fn observe(&mut self, losses: &DayLoss<'_>) {
        self.inner.observe(losses.as_slice());
    }
}
