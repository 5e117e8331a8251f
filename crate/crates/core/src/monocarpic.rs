//! Experts that wake once and die.
//!
//! Members live in lifetime buckets `U_1..U_L`. Bucket `l` is rebuilt every
//! `2^(l-1)` days: after day `t`, buckets `1..=pw(t)` cascade into bucket
//! `pw(t) + 1` and dead members are dropped. Each bucket runs an
//! [`IntervalRegret`] over its members (restarted whenever the bucket is
//! rebuilt), and a top-level [`IntervalRegret`] over the buckets decides
//! whose pick is played. A member that dies between rebuilds stays in its
//! bucket with unit loss until the next rebuild.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use thiserror::Error;

use crate::dyadic::pw;
use crate::hedge::SquintGrid;
use crate::interval::IntervalRegret;
use crate::math::ceil_log2;
use crate::meter::{MemoryReport, Metered};
use crate::types::{Day, ExpertId};

/// A member is one waking of an expert: the same expert waking again later
/// is a different member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MemberKey {
    pub expert: ExpertId,
    pub wake: Day,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonocarpicError {
    #[error("member {key:?} must wake on the current day {today}")]
    WrongDay { key: MemberKey, today: Day },
    #[error("member {0:?} was already admitted")]
    AlreadyAdmitted(MemberKey),
    #[error("member {0:?} is not present")]
    Unknown(MemberKey),
    #[error("admissions for day {0} must happen before the day's action")]
    AfterAct(Day),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Member {
    key: MemberKey,
    alive: bool,
}

#[derive(Debug, Clone)]
struct Bucket {
    members: Vec<Member>,
    exp: Option<IntervalRegret>,
    proposal: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MonocarpicExpert {
    horizon: Day,
    grid: Arc<SquintGrid>,
    // Completed days.
    day: Day,
    acted: bool,
    buckets: Vec<Bucket>,
    top: IntervalRegret,
    top_choice: Option<usize>,
}

impl MonocarpicExpert {
    pub fn new(horizon: Day, grid: Arc<SquintGrid>) -> Self {
        let levels = ceil_log2(horizon.max(1)) as usize + 1;
        let buckets = (0..levels)
            .map(|_| Bucket {
                members: Vec::new(),
                exp: None,
                proposal: None,
            })
            .collect();
        MonocarpicExpert {
            horizon,
            top: IntervalRegret::new(levels, horizon, grid.clone()),
            grid,
            day: 0,
            acted: false,
            buckets,
            top_choice: None,
        }
    }

    pub fn horizon(&self) -> Day {
        self.horizon
    }

    /// The day the next action is for.
    pub fn today(&self) -> Day {
        self.day + 1
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Members of bucket `level` (1-based), dead or alive.
    pub fn bucket(&self, level: usize) -> Vec<MemberKey> {
        self.buckets[level - 1]
            .members
            .iter()
            .map(|m| m.key)
            .collect()
    }

    /// Bucket level (1-based) currently holding `key`.
    pub fn level_of(&self, key: MemberKey) -> Option<usize> {
        self.buckets
            .iter()
            .position(|b| b.members.iter().any(|m| m.key == key))
            .map(|i| i + 1)
    }

    fn find_mut(&mut self, key: MemberKey) -> Option<&mut Member> {
        self.buckets
            .iter_mut()
            .flat_map(|b| b.members.iter_mut())
            .find(|m| m.key == key)
    }

    pub fn is_alive(&self, key: MemberKey) -> bool {
        self.buckets
            .iter()
            .flat_map(|b| b.members.iter())
            .any(|m| m.key == key && m.alive)
    }

    pub fn alive_count(&self) -> usize {
        self.buckets
            .iter()
            .flat_map(|b| b.members.iter())
            .filter(|m| m.alive)
            .count()
    }

    pub fn member_count(&self) -> usize {
        self.buckets.iter().map(|b| b.members.len()).sum()
    }

    /// Wake `key` into `U_1`. Must be called before the day's action, with
    /// `key.wake` equal to [`Self::today`].
    pub fn admit(&mut self, key: MemberKey) -> Result<(), MonocarpicError> {
        if self.acted {
            return Err(MonocarpicError::AfterAct(self.today()));
        }
        if key.wake != self.today() {
            return Err(MonocarpicError::WrongDay {
                key,
                today: self.today(),
            });
        }
        if self.level_of(key).is_some() {
            return Err(MonocarpicError::AlreadyAdmitted(key));
        }
        self.buckets[0].members.push(Member { key, alive: true });
        Ok(())
    }

    /// Mark `key` dead. It keeps unit loss until its bucket is rebuilt.
    pub fn kill(&mut self, key: MemberKey) -> Result<(), MonocarpicError> {
        match self.find_mut(key) {
            Some(m) => {
                m.alive = false;
                Ok(())
            }
            None => Err(MonocarpicError::Unknown(key)),
        }
    }

    /// Choose today's expert; `None` when every bucket is empty.
    pub fn act<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Option<ExpertId> {
        let t = self.today();
        for (i, b) in self.buckets.iter_mut().enumerate() {
            let period = 1u64 << i;
            if (t - 1).is_multiple_of(period) {
                b.exp = (!b.members.is_empty())
                    .then(|| IntervalRegret::new(b.members.len(), period, self.grid.clone()));
            }
            b.proposal = match b.exp.as_mut() {
                Some(e) => e.propose(rng),
                None => None,
            };
        }
        self.acted = true;
        self.top_choice = self.top.propose(rng);
        let level = self.delegate(self.top_choice.unwrap_or(0))?;
        let b = &self.buckets[level];
        b.proposal.map(|i| b.members[i].key.expert)
    }

    // Bucket whose pick stands in for `level`: itself if it has members,
    // otherwise the first non-empty bucket.
    fn delegate(&self, level: usize) -> Option<usize> {
        if self.buckets[level].proposal.is_some() {
            Some(level)
        } else {
            self.buckets.iter().position(|b| b.proposal.is_some())
        }
    }

    /// Settle the day with `loss(e)` for any expert `e`, then run the day's
    /// bucket migrations.
    pub fn observe(&mut self, loss: impl Fn(ExpertId) -> f64) {
        debug_assert!(self.acted, "observe without act");
        let t = self.today();
        let mut picked = vec![1.0; self.buckets.len()];
        let mut arm_losses = Vec::new();
        for (i, b) in self.buckets.iter_mut().enumerate() {
            if let (Some(exp), Some(p)) = (b.exp.as_mut(), b.proposal) {
                arm_losses.clear();
                arm_losses.extend(b.members.iter().map(|m| {
                    if m.alive {
                        loss(m.key.expert)
                    } else {
                        1.0
                    }
                }));
                exp.observe(&arm_losses);
                picked[i] = arm_losses[p];
            }
        }
        let top_losses: Vec<f64> = (0..self.buckets.len())
            .map(|l| self.delegate(l).map_or(1.0, |d| picked[d]))
            .collect();
        self.top.observe(&top_losses);

        let k = (pw(t).unwrap_or(0) as usize).min(self.buckets.len() - 1);
        for l in 0..k {
            let moved = core::mem::take(&mut self.buckets[l].members);
            let next = &mut self.buckets[l + 1].members;
            next.extend(moved);
            next.retain(|m| m.alive);
        }
        self.acted = false;
        self.day += 1;
    }
}

impl Metered for MonocarpicExpert {
    fn report_memory(&self, out: &mut MemoryReport) {
        // key (expert, wake) plus the alive flag
        out.add("monocarpic.members", 3 * self.member_count());
        let exp: usize = self
            .buckets
            .iter()
            .map(|b| b.exp.as_ref().map_or(0, |e| e.words()) + 1)
            .sum();
        out.add("monocarpic.buckets", exp);
        out.add("monocarpic.top", self.top.words() + 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn me(horizon: Day) -> MonocarpicExpert {
        MonocarpicExpert::new(horizon, Arc::new(SquintGrid::default()))
    }

    fn key(e: u32, wake: Day) -> MemberKey {
        MemberKey {
            expert: ExpertId(e),
            wake,
        }
    }

    #[test]
    fn admit_goes_to_first_bucket() {
        let mut m = me(16);
        m.admit(key(3, 1)).unwrap();
        m.admit(key(4, 1)).unwrap();
        assert_eq!(m.bucket(1), vec![key(3, 1), key(4, 1)]);
        assert_eq!(
            m.admit(key(3, 1)),
            Err(MonocarpicError::AlreadyAdmitted(key(3, 1)))
        );
        assert!(matches!(
            m.admit(key(5, 2)),
            Err(MonocarpicError::WrongDay { .. })
        ));
    }

    #[test]
    fn readmission_after_death_rejected() {
        let mut m = me(16);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        m.admit(key(1, 1)).unwrap();
        m.act(&mut rng);
        m.kill(key(1, 1)).unwrap();
        m.observe(|_| 0.0);
        m.act(&mut rng);
        m.observe(|_| 0.0);
        // removed at the day-2 rebuild
        assert_eq!(m.member_count(), 0);
        assert!(m.admit(key(1, 1)).is_err());
    }

    #[test]
    fn migration_recurrence() {
        let mut m = me(16);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        m.admit(key(0, 1)).unwrap();
        let mut levels = Vec::new();
        for _ in 0..8 {
            m.act(&mut rng);
            m.observe(|_| 0.5);
            levels.push(m.level_of(key(0, 1)).unwrap());
        }
        // after day 1: U_1, day 2: U_2, day 4: U_3, day 8: U_4
        assert_eq!(levels, vec![1, 2, 2, 3, 3, 3, 3, 4]);
    }

    #[test]
    fn odd_day_does_not_migrate() {
        let mut m = me(16);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        m.admit(key(0, 1)).unwrap();
        m.act(&mut rng);
        m.observe(|_| 0.0);
        assert_eq!(m.level_of(key(0, 1)), Some(1));
    }

    #[test]
    fn dead_member_kept_until_rebuild() {
        let mut m = me(32);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        m.admit(key(0, 1)).unwrap();
        m.act(&mut rng);
        m.observe(|_| 0.0);
        m.admit(key(1, 2)).unwrap();
        for _ in 2..=2 {
            m.act(&mut rng);
            m.observe(|_| 0.0);
        }
        // both in U_2 after day 2; kill expert 0 on day 3
        assert_eq!(m.level_of(key(0, 1)), Some(2));
        m.act(&mut rng);
        m.kill(key(0, 1)).unwrap();
        m.observe(|_| 0.0);
        assert_eq!(m.level_of(key(0, 1)), Some(2));
        assert!(!m.is_alive(key(0, 1)));
        m.act(&mut rng);
        m.observe(|_| 0.0);
        // day 4 rebuilds U_2 into U_3 and drops the dead member
        assert_eq!(m.level_of(key(0, 1)), None);
        assert_eq!(m.level_of(key(1, 2)), Some(3));
    }

    #[test]
    fn single_expert_always_played() {
        let mut m = me(64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(m.act(&mut rng), None);
        m.observe(|_| 0.0);
        m.admit(key(7, 2)).unwrap();
        for _ in 2..=64 {
            assert_eq!(m.act(&mut rng), Some(ExpertId(7)));
            m.observe(|_| 0.3);
        }
    }

    #[test]
    fn residency_bound() {
        // a member in U_l was woken fewer than 2^l days before entering it
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let horizon = 256;
            let mut m = me(horizon);
            let mut alive: Vec<MemberKey> = Vec::new();
            let mut entered: Vec<(MemberKey, usize, Day)> = Vec::new();
            for t in 1..=horizon {
                if rng.gen_bool(0.2) {
                    let k = key(rng.gen_range(0..16), t);
                    if m.admit(k).is_ok() {
                        alive.push(k);
                        entered.push((k, 1, t));
                    }
                }
                m.act(&mut rng);
                alive.retain(|&k| {
                    if rng.gen_bool(0.05) {
                        m.kill(k).unwrap();
                        false
                    } else {
                        true
                    }
                });
                m.observe(|_| 0.5);
                for e in entered.iter_mut() {
                    if let Some(l) = m.level_of(e.0) {
                        if l != e.1 {
                            e.1 = l;
                            e.2 = t;
                        }
                    }
                }
                for &(k, l, since) in &entered {
                    if m.level_of(k) == Some(l) {
                        assert!(
                            since + 1 - k.wake < (1 << l),
                            "{k:?} in U_{l} since {since}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn disjoint_lifetimes_low_loss() {
        let horizon = 1024u64;
        let mut ok = 0;
        for seed in 0..20 {
            let mut m = me(horizon);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut total = 0.0;
            for t in 1..=horizon {
                if t == 1 {
                    m.admit(key(0, 1)).unwrap();
                }
                if t == horizon / 2 + 1 {
                    m.admit(key(1, t)).unwrap();
                }
                let a = m.act(&mut rng);
                if t == horizon / 2 + 1 {
                    m.kill(key(0, 1)).unwrap();
                }
                let good = if t <= horizon / 2 { 0 } else { 1 };
                let loss = |e: ExpertId| if e.0 == good { 0.0 } else { 1.0 };
                total += a.map_or(1.0, loss);
                m.observe(loss);
            }
            if total <= horizon as f64 / 4.0 {
                ok += 1;
            }
        }
        assert!(ok >= 18, "{ok}/20");
    }

    #[test]
    fn identical_losses_zero_regret() {
        let mut m = me(64);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for e in 0..4 {
            m.admit(key(e, 1)).unwrap();
        }
        let mut total = 0.0;
        for t in 1..=64u64 {
            m.act(&mut rng).unwrap();
            let l = (t % 5) as f64 / 5.0;
            total += l;
            m.observe(|_| l);
        }
        let best: f64 = (1..=64u64).map(|t| (t % 5) as f64 / 5.0).sum();
        assert_eq!(total, best);
    }
}
