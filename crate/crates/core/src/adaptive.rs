//! The algorithm against adaptive adversaries.
//!
//! Time is cut into epochs of `B = 1/eps^2` days with `eps = 2^-k`, and there
//! are `R = k` threads with `eps_r = 2^(r-1) eps`. Two branches compete under
//! an [`IntervalRegret`] with horizon `T`:
//!
//! * RandomExpert. Thread `r` restarts every `1/eps_r^2` days. At a restart
//!   it draws `N_r` fresh experts for each of the restart's days (a column
//!   per day), runs one exponential-weights copy per column, and on the
//!   `b`-th day of the restart plays column `b`'s pick. An
//!   [`IntervalRegret`] over the threads, restarted every epoch, picks the
//!   thread.
//! * LongExpert. Alongside thread `r`, a keeper samples candidates at each
//!   restart and only watches them. At the restart's end, a candidate whose
//!   loss beat thread `r`'s realized loss by more than `c_adm / eps_r` joins
//!   the keeper's pool for `ceil(eps sqrt(n))` epochs. A [`MonocarpicExpert`]
//!   over the union of the pools plays; with an empty union the branch
//!   abstains.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::game::Learner;
use crate::hedge::{MwuState, SquintGrid};
use crate::interval::IntervalRegret;
use crate::meter::{MemoryReport, Metered};
use crate::monocarpic::{MemberKey, MonocarpicExpert};
use crate::pool::sample_subset;
use crate::rng::{RandomnessSource, StreamRng};
use crate::types::{Action, Day, DayLoss, ExpertId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptiveError {
    #[error("epsilon = {0} is not 2^-k for an integer k >= 1")]
    BadEpsilon(f64),
    #[error("epoch length 1/eps^2 = {epoch} does not divide T = {horizon}")]
    EpochDoesNotDivide { epoch: Day, horizon: Day },
    #[error("at least one expert is required")]
    NoExperts,
}

/// `k` with `eps = 2^-k`, if there is one with `k >= 1`.
pub fn epsilon_exponent(eps: f64) -> Option<u32> {
    if !(eps > 0.0 && eps < 1.0) {
        return None;
    }
    let k = libm::round(-libm::log2(eps));
    if !(1.0..=30.0).contains(&k) {
        return None;
    }
    let k = k as u32;
    (libm::ldexp(1.0, -(k as i32)) == eps).then_some(k)
}

/// Multipliers standing in for the logarithmic factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConstants {
    /// Sample width multiplier: `N_r = c_n eps_r^2 sqrt(n) / eps`.
    pub c_n: f64,
    /// Admission slack multiplier: a candidate must beat the thread by
    /// `c_adm / eps_r`.
    pub c_adm: f64,
}

impl AdaptiveConstants {
    pub const DESK: AdaptiveConstants = AdaptiveConstants {
        c_n: 4.0,
        c_adm: 2.0,
    };

    /// `log^2(nT)` and `2 log(nT)`, base 2.
    pub fn paper(n: usize, horizon: Day) -> Self {
        let log = libm::log2((n as f64 * horizon as f64).max(2.0));
        AdaptiveConstants {
            c_n: log * log,
            c_adm: 2.0 * log,
        }
    }
}

impl Default for AdaptiveConstants {
    fn default() -> Self {
        Self::DESK
    }
}

/// Epoch, thread and restart arithmetic. Threads are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSchedule {
    n: usize,
    horizon: Day,
    k: u32,
    c_n: f64,
}

impl AdaptiveSchedule {
    pub fn new(n: usize, horizon: Day, eps: f64, c_n: f64) -> Result<Self, AdaptiveError> {
        if n == 0 {
            return Err(AdaptiveError::NoExperts);
        }
        let k = epsilon_exponent(eps).ok_or(AdaptiveError::BadEpsilon(eps))?;
        let epoch = 1u64 << (2 * k);
        if horizon == 0 || !horizon.is_multiple_of(epoch) {
            return Err(AdaptiveError::EpochDoesNotDivide { epoch, horizon });
        }
        Ok(AdaptiveSchedule { n, horizon, k, c_n })
    }

    pub fn epsilon(&self) -> f64 {
        libm::ldexp(1.0, -(self.k as i32))
    }

    /// `B = 1/eps^2`.
    pub fn epoch_len(&self) -> Day {
        1 << (2 * self.k)
    }

    pub fn epochs(&self) -> u64 {
        self.horizon / self.epoch_len()
    }

    pub fn threads(&self) -> usize {
        self.k as usize
    }

    pub fn thread_epsilon(&self, r: usize) -> f64 {
        libm::ldexp(1.0, r as i32 - 1 - self.k as i32)
    }

    /// `1/eps_r^2`.
    pub fn restart_len(&self, r: usize) -> Day {
        1 << (2 * (self.k as usize + 1 - r))
    }

    pub fn restarts_per_epoch(&self, r: usize) -> u64 {
        1 << (2 * (r - 1))
    }

    /// `N_r`, at least 1.
    pub fn width(&self, r: usize) -> usize {
        let er = self.thread_epsilon(r);
        let w = self.c_n * er * er * libm::sqrt(self.n as f64) / self.epsilon();
        (libm::floor(w) as usize).max(1)
    }

    /// Epochs an admitted expert stays: `ceil(eps sqrt(n))`, at least 1.
    pub fn lifetime(&self) -> u64 {
        (libm::ceil(self.epsilon() * libm::sqrt(self.n as f64)) as u64).max(1)
    }

    /// Candidate sampling rate `1/(eps sqrt(n))`, at most 1.
    pub fn candidate_rate(&self) -> f64 {
        (1.0 / (self.epsilon() * libm::sqrt(self.n as f64))).min(1.0)
    }

    /// 1-based epoch containing `day`.
    pub fn epoch_of(&self, day: Day) -> u64 {
        (day - 1) / self.epoch_len() + 1
    }
}

/// One RandomExpert thread.
#[derive(Debug, Clone)]
pub struct Rexp {
    n: usize,
    width: usize,
    restart_len: Day,
    // `restart_len` columns of `width` slots, column-major.
    slots: Vec<ExpertId>,
    columns: Vec<MwuState>,
    // Day index within the restart of the next action, 0-based.
    b: usize,
    play: Option<ExpertId>,
    realized: f64,
    rng: StreamRng,
}

impl Rexp {
    pub fn new(n: usize, width: usize, restart_len: Day, source: &RandomnessSource) -> Self {
        Rexp {
            n,
            width,
            restart_len,
            slots: Vec::new(),
            columns: Vec::new(),
            b: 0,
            play: None,
            realized: 0.0,
            rng: source.rng(),
        }
    }

    fn restart(&mut self) {
        let cols = self.restart_len as usize;
        let n = self.n;
        let rng = &mut self.rng;
        self.slots = (0..cols * self.width)
            .map(|_| ExpertId::from_index(rng.gen_range(0..n)))
            .collect();
        self.columns = (0..cols)
            .map(|_| MwuState::with_horizon(self.width, self.restart_len))
            .collect();
        self.b = 0;
        self.realized = 0.0;
    }

    /// Slots of column `b` (0-based).
    pub fn column(&self, b: usize) -> &[ExpertId] {
        &self.slots[b * self.width..(b + 1) * self.width]
    }

    /// Day index within the restart of the next action, 0-based.
    pub fn position(&self) -> usize {
        self.b
    }

    /// Loss of this thread's own plays since its restart.
    pub fn realized_loss(&self) -> f64 {
        self.realized
    }

    pub fn act(&mut self) -> ExpertId {
        if self.b == 0 {
            self.restart();
        }
        let arm = self.columns[self.b].sample(&mut self.rng).unwrap_or(0);
        let e = self.column(self.b)[arm];
        self.play = Some(e);
        e
    }

    /// Returns the loss of today's play.
    pub fn observe(&mut self, losses: &DayLoss<'_>) -> f64 {
        let w = self.width;
        for (c, mwu) in self.columns.iter_mut().enumerate() {
            let slots = &self.slots[c * w..(c + 1) * w];
            mwu.update(|a| losses.loss(slots[a]));
        }
        let l = self.play.map_or(1.0, |e| losses.loss(e));
        self.realized += l;
        self.b += 1;
        if self.b as Day == self.restart_len {
            self.b = 0;
        }
        l
    }

    /// Whether the last observed day closed a restart.
    pub fn restart_done(&self) -> bool {
        self.b == 0
    }

    pub fn words(&self) -> usize {
        self.slots.len() + self.columns.iter().map(MwuState::words).sum::<usize>() + 3
    }
}

/// Whether a candidate clears the admission bar.
pub fn admits(candidate_loss: f64, thread_loss: f64, c_adm: f64, eps_r: f64) -> bool {
    candidate_loss < thread_loss - c_adm / eps_r
}

/// The candidate watcher and pool of one thread.
#[derive(Debug, Clone)]
pub struct Keeper {
    n: usize,
    rate: f64,
    candidates: Vec<(ExpertId, f64)>,
    // Expert -> last epoch it may stay through.
    pool: BTreeMap<ExpertId, u64>,
    admitted: u64,
    rng: StreamRng,
}

impl Keeper {
    pub fn new(n: usize, rate: f64, source: &RandomnessSource) -> Self {
        Keeper {
            n,
            rate,
            candidates: Vec::new(),
            pool: BTreeMap::new(),
            admitted: 0,
            rng: source.rng(),
        }
    }

    pub fn start_restart(&mut self) {
        let all: Vec<u32> = (0..self.n as u32).collect();
        self.candidates = sample_subset(&all, self.rate, &mut self.rng)
            .into_iter()
            .map(|e| (ExpertId(e), 0.0))
            .collect();
    }

    pub fn candidates(&self) -> &[(ExpertId, f64)] {
        &self.candidates
    }

    pub fn observe(&mut self, losses: &DayLoss<'_>) {
        for (e, l) in &mut self.candidates {
            *l += losses.loss(*e);
        }
    }

    /// Close a restart against the thread's realized loss. Admitted experts
    /// stay through epoch `epoch + lifetime`; one already in the pool has
    /// its stay extended instead.
    pub fn end_restart(
        &mut self,
        thread_loss: f64,
        c_adm: f64,
        eps_r: f64,
        epoch: u64,
        lifetime: u64,
    ) {
        for (e, l) in core::mem::take(&mut self.candidates) {
            if admits(l, thread_loss, c_adm, eps_r) {
                let until = self.pool.entry(e).or_insert(0);
                *until = (*until).max(epoch + lifetime);
                self.admitted += 1;
            }
        }
    }

    /// Drop experts whose stay ends with `epoch`.
    pub fn evict(&mut self, epoch: u64) {
        self.pool.retain(|_, until| *until > epoch);
    }

    pub fn pool(&self) -> &BTreeMap<ExpertId, u64> {
        &self.pool
    }

    /// Admissions so far, counting extensions.
    pub fn admitted(&self) -> u64 {
        self.admitted
    }

    pub fn words(&self) -> usize {
        2 * self.candidates.len() + 2 * self.pool.len()
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveLearner {
    n: usize,
    schedule: AdaptiveSchedule,
    constants: AdaptiveConstants,
    rexp: Vec<Rexp>,
    random_top: IntervalRegret,
    random_rng: StreamRng,
    random_pick: usize,
    keepers: Vec<Keeper>,
    mono: MonocarpicExpert,
    mono_rng: StreamRng,
    awake: BTreeMap<ExpertId, Day>,
    long_disabled: bool,
    top: IntervalRegret,
    top_rng: StreamRng,
    branches: [Action; 2],
    branch_loss: [f64; 2],
}

impl AdaptiveLearner {
    pub fn new(
        n: usize,
        horizon: Day,
        eps: f64,
        constants: AdaptiveConstants,
        grid: Arc<SquintGrid>,
        source: &RandomnessSource,
    ) -> Result<Self, AdaptiveError> {
        let schedule = AdaptiveSchedule::new(n, horizon, eps, constants.c_n)?;
        let r = schedule.threads();
        let rexp = (1..=r)
            .map(|t| {
                Rexp::new(
                    n,
                    schedule.width(t),
                    schedule.restart_len(t),
                    &source.fork_indexed("adaptive/rexp", t as u64),
                )
            })
            .collect();
        let keepers = (1..=r)
            .map(|t| {
                Keeper::new(
                    n,
                    schedule.candidate_rate(),
                    &source.fork_indexed("adaptive/keeper", t as u64),
                )
            })
            .collect();
        if schedule.width(1) as f64 > n as f64 && constants.c_n > n as f64 {
            log::info!(
                "adaptive: sample width {} exceeds n = {n}",
                schedule.width(1)
            );
        }
        Ok(AdaptiveLearner {
            n,
            schedule,
            constants,
            rexp,
            random_top: IntervalRegret::new(r, schedule.epoch_len(), grid.clone()),
            random_rng: source.fork("adaptive/random").rng(),
            random_pick: 0,
            keepers,
            mono: MonocarpicExpert::new(horizon, grid.clone()),
            mono_rng: source.fork("adaptive/long").rng(),
            awake: BTreeMap::new(),
            long_disabled: false,
            top: IntervalRegret::new(2, horizon, grid),
            top_rng: source.fork("adaptive/top").rng(),
            branches: [Action::Abstain; 2],
            branch_loss: [0.0; 2],
        })
    }

    /// Never admit anything: LongExpert always abstains.
    pub fn without_long_expert(mut self) -> Self {
        self.long_disabled = true;
        self
    }

    pub fn schedule(&self) -> &AdaptiveSchedule {
        &self.schedule
    }

    /// Thread `r` (1-based).
    pub fn thread(&self, r: usize) -> &Rexp {
        &self.rexp[r - 1]
    }

    pub fn keeper(&self, r: usize) -> &Keeper {
        &self.keepers[r - 1]
    }

    pub fn monocarpic(&self) -> &MonocarpicExpert {
        &self.mono
    }

    /// Experts currently in some keeper's pool.
    pub fn pool_experts(&self) -> Vec<ExpertId> {
        self.awake.keys().copied().collect()
    }

    /// Cumulative losses of the RandomExpert and LongExpert branches.
    pub fn branch_losses(&self) -> [f64; 2] {
        self.branch_loss
    }

    /// Today's RandomExpert and LongExpert actions.
    pub fn branch_actions(&self) -> [Action; 2] {
        self.branches
    }

    fn sync_members(&mut self, admit_day: Option<Day>) {
        let present: BTreeSet<ExpertId> = self
            .keepers
            .iter()
            .flat_map(|k| k.pool().keys().copied())
            .collect();
        let gone: Vec<ExpertId> = self
            .awake
            .keys()
            .copied()
            .filter(|e| !present.contains(e))
            .collect();
        for e in gone {
            let wake = self.awake.remove(&e).expect("awake expert");
            if let Err(err) = self.mono.kill(MemberKey { expert: e, wake }) {
                log::debug!("adaptive: {err}");
            }
        }
        if let Some(day) = admit_day {
            for e in present {
                if let alloc::collections::btree_map::Entry::Vacant(v) = self.awake.entry(e) {
                    self.mono
                        .admit(MemberKey {
                            expert: e,
                            wake: day,
                        })
                        .expect("admission happens before the day's action");
                    v.insert(day);
                }
            }
        }
    }
}

impl Metered for AdaptiveLearner {
    fn report_memory(&self, out: &mut MemoryReport) {
        out.add("adaptive.rexp", self.rexp.iter().map(Rexp::words).sum());
        out.add("adaptive.random", self.random_top.words() + 1);
        out.add(
            "adaptive.keepers",
            self.keepers.iter().map(Keeper::words).sum(),
        );
        out.add("adaptive.awake", 2 * self.awake.len());
        self.mono.report_memory(out);
        out.add("adaptive.top", self.top.words() + 4);
    }
}

impl Learner for AdaptiveLearner {
    fn experts(&self) -> usize {
        self.n
    }

    fn act(&mut self, day: Day) -> Action {
        if (day - 1).is_multiple_of(self.schedule.epoch_len()) {
            self.random_top.restart();
        }
        for (r, keeper) in self.keepers.iter_mut().enumerate() {
            if self.rexp[r].position() == 0 {
                keeper.start_restart();
            }
        }
        let plays: Vec<ExpertId> = self.rexp.iter_mut().map(Rexp::act).collect();
        self.random_pick = self.random_top.propose(&mut self.random_rng).unwrap_or(0);
        self.branches[0] = Action::Play(plays[self.random_pick]);

        self.sync_members(Some(day));
        self.branches[1] = match self.mono.act(&mut self.mono_rng) {
            Some(e) => Action::Play(e),
            None => Action::Abstain,
        };
        let branch = self.top.propose(&mut self.top_rng).unwrap_or(0);
        self.branches[branch]
    }

    fn observe(&mut self, losses: &DayLoss<'_>) {
        let day = losses.day();
        let thread_losses: Vec<f64> = self.rexp.iter_mut().map(|t| t.observe(losses)).collect();
        self.random_top.observe(&thread_losses);
        self.mono.observe(|e| losses.loss(e));
        let branch = [self.branches[0].loss(losses), self.branches[1].loss(losses)];
        self.branch_loss[0] += branch[0];
        self.branch_loss[1] += branch[1];
        self.top.observe(&branch);

        let epoch = self.schedule.epoch_of(day);
        for (r, keeper) in self.keepers.iter_mut().enumerate() {
            keeper.observe(losses);
            let thread = &self.rexp[r];
            if thread.restart_done() {
                if self.long_disabled {
                    keeper.candidates.clear();
                } else {
                    keeper.end_restart(
                        thread.realized_loss(),
                        self.constants.c_adm,
                        self.schedule.thread_epsilon(r + 1),
                        epoch,
                        self.schedule.lifetime(),
                    );
                }
            }
        }
        if day.is_multiple_of(self.schedule.epoch_len()) {
            for k in &mut self.keepers {
                k.evict(epoch);
            }
        }
        self.sync_members(None);
    }
}
