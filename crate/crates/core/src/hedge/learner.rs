//! Full-information learners built directly on the hedging primitives.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::mwu::MwuState;
use super::squint::{SquintGrid, SquintStats};
use crate::game::Learner;
use crate::math::pick_by_quantile;
use crate::meter::{MemoryReport, Metered};
use crate::rng::{RandomnessSource, StreamRng};
use crate::types::{Action, Day, DayLoss, ExpertId};

/// Exponential weights over all `n` experts, or over a fixed random subset
/// of them when memory is capped below `n`.
#[derive(Debug, Clone)]
pub struct MwuLearner {
    n: usize,
    // Sorted ids of the tracked experts; `None` tracks everyone.
    tracked: Option<Vec<ExpertId>>,
    state: MwuState,
    rng: StreamRng,
}

impl MwuLearner {
    pub fn new(n: usize, horizon: Day, source: &RandomnessSource) -> Self {
        MwuLearner {
            n,
            tracked: None,
            state: MwuState::with_horizon(n, horizon),
            rng: source.fork("mwu").rng(),
        }
    }

    pub fn with_eta(n: usize, eta: f64, source: &RandomnessSource) -> Self {
        MwuLearner {
            n,
            tracked: None,
            state: MwuState::new(n, eta),
            rng: source.fork("mwu").rng(),
        }
    }

    /// Track a uniformly random subset of `budget` experts (all of them if
    /// `budget >= n`).
    pub fn tracked(n: usize, budget: usize, horizon: Day, source: &RandomnessSource) -> Self {
        if budget >= n {
            return Self::new(n, horizon, source);
        }
        let mut pick = source.fork("tracked").rng();
        let mut ids: Vec<ExpertId> = rand::seq::index::sample(&mut pick, n, budget)
            .into_iter()
            .map(ExpertId::from_index)
            .collect();
        ids.sort_unstable();
        MwuLearner {
            n,
            state: MwuState::with_horizon(ids.len(), horizon),
            tracked: Some(ids),
            rng: source.fork("mwu").rng(),
        }
    }

    pub fn state(&self) -> &MwuState {
        &self.state
    }

    pub fn tracked_experts(&self) -> Option<&[ExpertId]> {
        self.tracked.as_deref()
    }

    fn expert_of(&self, arm: usize) -> ExpertId {
        match &self.tracked {
            Some(ids) => ids[arm],
            None => ExpertId::from_index(arm),
        }
    }
}

impl Metered for MwuLearner {
    fn report_memory(&self, out: &mut MemoryReport) {
        out.add("mwu", self.state.words());
        if let Some(ids) = &self.tracked {
            out.add("mwu.tracked", ids.len());
        }
    }
}

impl Learner for MwuLearner {
    fn experts(&self) -> usize {
        self.n
    }

    fn act(&mut self, _day: Day) -> Action {
        match self.state.sample(&mut self.rng) {
            Some(arm) => Action::Play(self.expert_of(arm)),
            None => Action::Abstain,
        }
    }

    fn current_distribution(&self) -> Option<Vec<f64>> {
        let p = self.state.distribution()?;
        match &self.tracked {
            None => Some(p),
            Some(ids) => {
                let mut full = vec![0.0; self.n];
                for (id, q) in ids.iter().zip(p) {
                    full[id.index()] = q;
                }
                Some(full)
            }
        }
    }

    fn observe(&mut self, losses: &DayLoss<'_>) {
        match &self.tracked {
            None => self.state.update_from(losses.as_slice()),
            Some(ids) => {
                let ids = ids.as_slice();
                self.state.update(|arm| losses.loss(ids[arm]));
            }
        }
    }
}

/// Squint over the `n` experts with a uniform prior: `p(i) ∝ weight(S_i, V_i)`
/// where `v_i = <p, loss> - loss_i` is expert `i`'s instantaneous regret.
#[derive(Debug, Clone)]
pub struct SquintHedge {
    grid: Arc<SquintGrid>,
    stats: Vec<SquintStats>,
    rng: StreamRng,
    // Today's distribution, computed in `act` and consumed by `observe`.
    current: Vec<f64>,
}

impl SquintHedge {
    pub fn new(n: usize, grid: Arc<SquintGrid>, source: &RandomnessSource) -> Self {
        SquintHedge {
            grid,
            stats: vec![SquintStats::default(); n],
            rng: source.fork("squint").rng(),
            current: Vec::new(),
        }
    }

    fn distribution(&self) -> Vec<f64> {
        let logs: Vec<f64> = self.stats.iter().map(|s| self.grid.log_weight(s)).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|l| libm::exp(l - max)).collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            let u = 1.0 / w.len() as f64;
            w.iter_mut().for_each(|x| *x = u);
        } else {
            w.iter_mut().for_each(|x| *x /= total);
        }
        w
    }

    pub fn stats(&self) -> &[SquintStats] {
        &self.stats
    }
}

impl Metered for SquintHedge {
    // The quadrature grid is a fixed table determined by its resolution and
    // is not counted.
    fn report_memory(&self, out: &mut MemoryReport) {
        out.add("squint", self.stats.len() * SquintStats::WORDS);
    }
}

impl Learner for SquintHedge {
    fn experts(&self) -> usize {
        self.stats.len()
    }

    fn act(&mut self, _day: Day) -> Action {
        if self.stats.is_empty() {
            return Action::Abstain;
        }
        self.current = self.distribution();
        let u: f64 = self.rng.gen();
        match pick_by_quantile(&self.current, u) {
            Some(i) => Action::Play(ExpertId::from_index(i)),
            None => Action::Abstain,
        }
    }

    fn current_distribution(&self) -> Option<Vec<f64>> {
        if self.current.len() == self.stats.len() && !self.stats.is_empty() {
            Some(self.current.clone())
        } else if self.stats.is_empty() {
            None
        } else {
            Some(self.distribution())
        }
    }

    fn observe(&mut self, losses: &DayLoss<'_>) {
        if self.current.len() != self.stats.len() {
            self.current = self.distribution();
        }
        let l = losses.as_slice();
        let mix: f64 = self.current.iter().zip(l).map(|(p, x)| p * x).sum();
        for (s, x) in self.stats.iter_mut().zip(l) {
            s.push(mix - x);
        }
        self.current.clear();
    }
}
