//! Epoch-based pool learner.
//!
//! Each epoch of `B` days starts by sampling every expert into `P_0` with
//! probability `1/n`, then plays exponential weights (restarted, horizon
//! `B`) over the whole pool. After epoch `e`, sub-pools `0..=pw(e)` are
//! merged upward one level at a time.

use alloc::vec::Vec;

use super::merge::{merge, sample_subset, PoolConstants};
use super::table::{EntryId, EntryTable};
use crate::dyadic::pw;
use crate::game::Learner;
use crate::hedge::MwuState;
use crate::math::floor_log2;
use crate::meter::{MemoryReport, Metered};
use crate::rng::{RandomnessSource, StreamRng};
use crate::types::{Action, Day, DayLoss, ExpertId};

/// Largest power of two not above `(T/n)^(2/3)`, at least 1.
pub fn default_epoch_len(n: usize, horizon: Day) -> Day {
    let x = libm::pow(horizon as f64 / n.max(1) as f64, 2.0 / 3.0);
    if x < 2.0 {
        1
    } else {
        1u64 << floor_log2(x as u64)
    }
}

/// Sub-pools `P_0..P_L` over a shared [`EntryTable`].
#[derive(Debug, Clone, Default)]
pub struct SubPools {
    levels: Vec<Vec<EntryId>>,
}

impl SubPools {
    pub fn new(levels: usize) -> Self {
        SubPools {
            levels: (0..levels.max(2)).map(|_| Vec::new()).collect(),
        }
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &[EntryId] {
        &self.levels[l]
    }

    pub fn push(&mut self, l: usize, id: EntryId) {
        self.levels[l].push(id);
    }

    pub fn extend(&mut self, l: usize, ids: impl IntoIterator<Item = EntryId>) {
        self.levels[l].extend(ids);
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(Vec::is_empty)
    }

    pub fn max_level_len(&self) -> usize {
        self.levels.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// All entries, lowest level first.
    pub fn all(&self) -> Vec<EntryId> {
        self.levels.iter().flatten().copied().collect()
    }

    pub fn contains(&self, id: EntryId) -> bool {
        self.levels.iter().any(|l| l.contains(&id))
    }

    /// Empty every level, returning what was held.
    pub fn take_all(&mut self) -> Vec<EntryId> {
        let out = self.all();
        self.levels.iter_mut().for_each(Vec::clear);
        out
    }

    /// Replace level `l` by its merge with `extra`; pruned entries leave
    /// the table.
    pub fn merge_into<R: rand::RngCore + ?Sized>(
        &mut self,
        l: usize,
        extra: &[EntryId],
        table: &mut EntryTable,
        constants: &PoolConstants,
        rng: &mut R,
    ) {
        let merged = merge(table, &self.levels[l], extra, constants, rng);
        let dropped: Vec<EntryId> = self.levels[l]
            .iter()
            .chain(extra)
            .copied()
            .filter(|id| !merged.contains(id))
            .collect();
        table.remove_all(dropped);
        self.levels[l] = merged;
    }

    /// `P_{l+1} <- merge(P_{l+1}, P_l)`, `P_l <- {}` for `l = 0..=upto`
    /// (capped at the top level).
    pub fn cascade<R: rand::RngCore + ?Sized>(
        &mut self,
        upto: usize,
        table: &mut EntryTable,
        constants: &PoolConstants,
        rng: &mut R,
    ) {
        let top = self.levels.len() - 2;
        for l in 0..=upto.min(top) {
            let lower = core::mem::take(&mut self.levels[l]);
            self.merge_into(l + 1, &lower, table, constants, rng);
        }
    }

    /// One word per held entry id.
    pub fn words(&self) -> usize {
        self.len()
    }
}

#[derive(Debug, Clone)]
pub struct Baseline {
    n: usize,
    epoch_len: Day,
    constants: PoolConstants,
    table: EntryTable,
    pools: SubPools,
    // The epoch's MWU arms, in `pools.all()` order.
    arms: Vec<EntryId>,
    mwu: MwuState,
    epoch: u64,
    sample_rng: StreamRng,
    merge_rng: StreamRng,
    mwu_rng: StreamRng,
    max_seen: usize,
}

impl Baseline {
    pub fn new(
        n: usize,
        horizon: Day,
        epoch_len: Day,
        constants: PoolConstants,
        source: &RandomnessSource,
    ) -> Self {
        let epochs = horizon.div_ceil(epoch_len.max(1)).max(1);
        Baseline {
            n,
            epoch_len: epoch_len.max(1),
            constants,
            table: EntryTable::new(),
            pools: SubPools::new(floor_log2(epochs) as usize + 2),
            arms: Vec::new(),
            mwu: MwuState::new(0, 0.0),
            epoch: 0,
            sample_rng: source.fork("baseline/sample").rng(),
            merge_rng: source.fork("baseline/merge").rng(),
            mwu_rng: source.fork("baseline/mwu").rng(),
            max_seen: 0,
        }
    }

    pub fn epoch_len(&self) -> Day {
        self.epoch_len
    }

    pub fn pools(&self) -> &SubPools {
        &self.pools
    }

    pub fn table(&self) -> &EntryTable {
        &self.table
    }

    /// Largest sub-pool seen at any epoch end so far.
    pub fn max_sub_pool_seen(&self) -> usize {
        self.max_seen
    }

    fn start_epoch(&mut self) {
        self.epoch += 1;
        let all: Vec<u32> = (0..self.n as u32).collect();
        let fresh = sample_subset(&all, 1.0 / self.n.max(1) as f64, &mut self.sample_rng);
        for e in fresh {
            let id = self.table.insert(ExpertId(e));
            self.pools.push(0, id);
        }
        self.arms = self.pools.all();
        self.mwu = MwuState::with_horizon(self.arms.len(), self.epoch_len);
    }

    fn end_epoch(&mut self) {
        let upto = pw(self.epoch).unwrap_or(0) as usize;
        self.pools
            .cascade(upto, &mut self.table, &self.constants, &mut self.merge_rng);
        let biggest = self.pools.max_level_len();
        if biggest > self.constants.pool_cap {
            log::warn!(
                "baseline epoch {}: sub-pool of {} exceeds cap {}",
                self.epoch,
                biggest,
                self.constants.pool_cap
            );
        }
        self.max_seen = self.max_seen.max(biggest);
    }
}

impl Metered for Baseline {
    fn report_memory(&self, out: &mut MemoryReport) {
        out.add("pool.table", self.table.words());
        out.add("pool.members", self.pools.words());
        out.add("pool.mwu", self.arms.len() + self.mwu.words());
        out.add("pool.epoch", 1);
    }
}

impl Learner for Baseline {
    fn experts(&self) -> usize {
        self.n
    }

    fn act(&mut self, day: Day) -> Action {
        if (day - 1).is_multiple_of(self.epoch_len) {
            self.start_epoch();
        }
        match self.mwu.sample(&mut self.mwu_rng) {
            Some(a) => Action::Play(self.table.entry(self.arms[a]).expert),
            None => {
                log::debug!("baseline day {day}: empty pool, abstaining");
                Action::Abstain
            }
        }
    }

    fn current_distribution(&self) -> Option<Vec<f64>> {
        let q = self.mwu.distribution()?;
        let mut p = alloc::vec![0.0; self.n];
        for (id, x) in self.arms.iter().zip(q) {
            p[self.table.entry(*id).expert.index()] += x;
        }
        Some(p)
    }

    fn observe(&mut self, losses: &DayLoss<'_>) {
        self.table.observe(losses);
        let (arms, table) = (&self.arms, &self.table);
        self.mwu
            .update(|a| losses.loss(table.entry(arms[a]).expert));
        if losses.day().is_multiple_of(self.epoch_len) {
            self.end_epoch();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{run_game, Adversary};
    use rand::Rng;

    struct Gap(StreamRng, usize);
    impl Adversary for Gap {
        fn experts(&self) -> usize {
            self.1
        }
        fn reveal(&mut self, _: Day, _: Option<&[f64]>, out: &mut [f64]) {
            for (i, x) in out.iter_mut().enumerate() {
                let m = if i == 0 { 0.1 } else { 0.9 };
                *x = if self.0.gen::<f64>() < m { 1.0 } else { 0.0 };
            }
        }
    }

    struct Flat(usize);
    impl Adversary for Flat {
        fn experts(&self) -> usize {
            self.0
        }
        fn reveal(&mut self, day: Day, _: Option<&[f64]>, out: &mut [f64]) {
            out.iter_mut().for_each(|x| *x = (day % 3) as f64 / 3.0);
        }
    }

    #[test]
    fn epoch_len_default() {
        assert_eq!(default_epoch_len(32, 8192), 32);
        assert_eq!(default_epoch_len(64, 8192), 16);
        assert_eq!(default_epoch_len(8, 8), 1);
    }

    #[test]
    fn single_expert() {
        let src = RandomnessSource::new(0);
        let mut b = Baseline::new(1, 256, 16, PoolConstants::DESK, &src);
        let mut a = Flat(1);
        let t = run_game(&mut b, &mut a, 256, 256).unwrap();
        assert_eq!(t.abstentions, 0);
        assert_eq!(t.regret, 0.0);
    }

    #[test]
    fn equal_losses_keep_pool_small() {
        let src = RandomnessSource::new(1);
        let mut b = Baseline::new(16, 4096, 16, PoolConstants::DESK, &src);
        let mut a = Flat(16);
        run_game(&mut b, &mut a, 4096, 4096).unwrap();
        assert!(b.max_sub_pool_seen() <= PoolConstants::DESK.pool_cap);
    }

    #[test]
    fn stationary_gap_low_average_regret() {
        // Few experts and long epochs: the good expert is sampled early and
        // the per-epoch restart cost is small.
        let (n, b, t) = (2usize, 256u64, 1u64 << 14);
        let mut ok = 0;
        for seed in 0..20 {
            let src = RandomnessSource::new(seed);
            let mut l = Baseline::new(n, t, b, PoolConstants::DESK, &src);
            let mut a = Gap(src.fork("adv").rng(), n);
            let tr = run_game(&mut l, &mut a, t, t).unwrap();
            if tr.average_regret() <= 0.1 {
                ok += 1;
            }
        }
        assert!(ok >= 18, "{ok}/20");
    }

    #[test]
    fn sub_pools_disjoint() {
        let src = RandomnessSource::new(5);
        let mut b = Baseline::new(8, 1024, 8, PoolConstants::DESK, &src);
        let mut a = Gap(src.fork("adv").rng(), 8);
        for d in 1..=1024 {
            b.act(d);
            let mut buf = [0.0; 8];
            a.reveal(d, None, &mut buf);
            b.observe(&DayLoss::new(d, &buf).unwrap());
            let all = b.pools().all();
            let mut sorted = all.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), all.len());
            assert_eq!(b.table().len(), all.len());
        }
    }
}
