//! Grouping: split the experts into `G` contiguous groups, run one
//! sub-learner per group on its slice of the losses, and pick a group each
//! day with exponential weights over the sub-learners' realized losses.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use super::mwu::MwuState;
use crate::game::Learner;
use crate::meter::{MemoryReport, Metered};
use crate::rng::{RandomnessSource, StreamRng};
use crate::types::{Action, Day, DayLoss, ExpertId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("cannot split {n} experts into {groups} groups")]
    OutOfRange { n: usize, groups: usize },
    #[error("sub-learner {group} covers {got} experts, its group has {want}")]
    Mismatch {
        group: usize,
        got: usize,
        want: usize,
    },
}

/// Contiguous, balanced partition of `0..n` into `groups` ranges. The first
/// `n % groups` ranges get one extra expert.
pub fn group_partition(n: usize, groups: usize) -> Result<Vec<Range<usize>>, GroupError> {
    if groups == 0 || groups > n {
        return Err(GroupError::OutOfRange { n, groups });
    }
    let base = n / groups;
    let extra = n % groups;
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for g in 0..groups {
        let len = base + usize::from(g < extra);
        out.push(start..start + len);
        start += len;
    }
    Ok(out)
}

#[derive(Debug)]
struct Top {
    mwu: MwuState,
    rng: StreamRng,
    chosen: usize,
    // Each sub-learner's action today, in its own index space.
    actions: Vec<Action>,
}

/// Sub-learners over the groups of a [`group_partition`] plus a top-level
/// MWU over them. With a single group there is no top level at all and the
/// wrapper is a pass-through.
#[derive(Debug)]
pub struct GroupedLearner<L> {
    n: usize,
    ranges: Vec<Range<usize>>,
    subs: Vec<L>,
    top: Option<Top>,
}

impl<L: Learner> GroupedLearner<L> {
    /// `build(j, size, source)` creates the sub-learner of group `j`. With
    /// one group it receives `source` itself; otherwise
    /// `source.fork_indexed("group", j)`. The top MWU draws from
    /// `source.fork("mwu")`.
    pub fn new(
        n: usize,
        groups: usize,
        horizon: Day,
        source: &RandomnessSource,
        mut build: impl FnMut(usize, usize, &RandomnessSource) -> L,
    ) -> Result<Self, GroupError> {
        let ranges = group_partition(n, groups)?;
        let mut subs = Vec::with_capacity(groups);
        for (j, r) in ranges.iter().enumerate() {
            let src = if groups == 1 {
                *source
            } else {
                source.fork_indexed("group", j as u64)
            };
            let sub = build(j, r.len(), &src);
            if sub.experts() != r.len() {
                return Err(GroupError::Mismatch {
                    group: j,
                    got: sub.experts(),
                    want: r.len(),
                });
            }
            subs.push(sub);
        }
        let top = (groups > 1).then(|| Top {
            mwu: MwuState::with_horizon(groups, horizon),
            rng: source.fork("mwu").rng(),
            chosen: 0,
            actions: vec![Action::Abstain; groups],
        });
        Ok(GroupedLearner {
            n,
            ranges,
            subs,
            top,
        })
    }

    pub fn groups(&self) -> usize {
        self.subs.len()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn sub_learners(&self) -> &[L] {
        &self.subs
    }

    pub fn top_state(&self) -> Option<&MwuState> {
        self.top.as_ref().map(|t| &t.mwu)
    }

    fn lift(&self, group: usize, a: Action) -> Action {
        match a {
            Action::Play(e) => {
                Action::Play(ExpertId::from_index(self.ranges[group].start + e.index()))
            }
            Action::Abstain => Action::Abstain,
        }
    }
}

impl<L: Learner> Metered for GroupedLearner<L> {
    fn report_memory(&self, out: &mut MemoryReport) {
        for s in &self.subs {
            s.report_memory(out);
        }
        if let Some(t) = &self.top {
            out.add("group.mwu", t.mwu.words());
            out.add("group.actions", t.actions.len() + 1);
        }
    }
}

impl<L: Learner> Learner for GroupedLearner<L> {
    fn experts(&self) -> usize {
        self.n
    }

    fn act(&mut self, day: Day) -> Action {
        let Some(top) = self.top.as_mut() else {
            return self.subs[0].act(day);
        };
        for (a, s) in top.actions.iter_mut().zip(self.subs.iter_mut()) {
            *a = s.act(day);
        }
        top.chosen = top.mwu.sample(&mut top.rng).unwrap_or(0);
        let (g, a) = (top.chosen, top.actions[top.chosen]);
        self.lift(g, a)
    }

    fn current_distribution(&self) -> Option<Vec<f64>> {
        let Some(top) = self.top.as_ref() else {
            return self.subs[0].current_distribution();
        };
        let q = top.mwu.distribution()?;
        let mut p = vec![0.0; self.n];
        for (g, (s, r)) in self.subs.iter().zip(&self.ranges).enumerate() {
            match s.current_distribution() {
                Some(sub) => {
                    for (i, x) in sub.iter().enumerate() {
                        p[r.start + i] += q[g] * x;
                    }
                }
                None => {
                    if let Action::Play(e) = top.actions[g] {
                        p[r.start + e.index()] += q[g];
                    }
                }
            }
        }
        Some(p)
    }

    fn observe(&mut self, losses: &DayLoss<'_>) {
        for (s, r) in self.subs.iter_mut().zip(&self.ranges) {
            s.observe(&losses.slice(r.start, r.len()));
        }
        if let Some(top) = self.top.as_mut() {
            let ranges = &self.ranges;
            let actions = &top.actions;
            top.mwu
                .update(|g| actions[g].loss(&losses.slice(ranges[g].start, ranges[g].len())));
        }
    }
}
