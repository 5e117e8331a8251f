//! Pool entries and their loss snapshots.
//!
//! Every entry keeps its cumulative loss since entry, `C_i`. Whenever a new
//! entry day `d` appears, every entry already present freezes `C_i` at `d`.
//! This is enough to recover the loss of `i` over any segment between two
//! entry days (or an entry day and now) that starts no earlier than `i`'s
//! own entry, which are exactly the segments the covering test needs.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;

use crate::types::{Day, DayLoss, ExpertId};

/// Distinct even when two entries share the underlying expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryId(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub id: EntryId,
    pub expert: ExpertId,
    /// First day whose loss counts towards `cum`.
    pub entered: Day,
    /// Loss accumulated since `entered`.
    pub cum: f64,
    snapshots: BTreeMap<Day, f64>,
}

impl PoolEntry {
    /// Frozen `C_i` at the start of `day`.
    pub fn snapshot(&self, day: Day) -> Option<f64> {
        self.snapshots.get(&day).copied()
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshots.len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct EntryTable {
    entries: BTreeMap<EntryId, PoolEntry>,
    next_id: u64,
    // Start of the next day to be observed.
    clock: Day,
}

impl EntryTable {
    pub fn new() -> Self {
        EntryTable {
            entries: BTreeMap::new(),
            next_id: 0,
            clock: 1,
        }
    }

    /// The time point "now": the start of the first unobserved day.
    pub fn clock(&self) -> Day {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: EntryId) -> Option<&PoolEntry> {
        self.entries.get(&id)
    }

    pub fn entry(&self, id: EntryId) -> &PoolEntry {
        &self.entries[&id]
    }

    pub fn contains(&self, id: EntryId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PoolEntry> + '_ {
        self.entries.values()
    }

    /// Add `expert` entering now.
    pub fn insert(&mut self, expert: ExpertId) -> EntryId {
        let now = self.clock;
        for e in self.entries.values_mut() {
            if e.entered < now {
                e.snapshots.entry(now).or_insert(e.cum);
            }
        }
        let id = EntryId(self.next_id);
        self.next_id += 1;
        self.entries.insert(
            id,
            PoolEntry {
                id,
                expert,
                entered: now,
                cum: 0.0,
                snapshots: BTreeMap::new(),
            },
        );
        id
    }

    /// Drop entries and any snapshot day no remaining entry entered on.
    pub fn remove_all(&mut self, ids: impl IntoIterator<Item = EntryId>) {
        let mut any = false;
        for id in ids {
            any |= self.entries.remove(&id).is_some();
        }
        if any {
            let live: BTreeSet<Day> = self.entries.values().map(|e| e.entered).collect();
            for e in self.entries.values_mut() {
                e.snapshots.retain(|d, _| live.contains(d));
            }
        }
    }

    pub fn remove(&mut self, id: EntryId) {
        self.remove_all(core::iter::once(id));
    }

    /// Add one day of losses to every entry.
    pub fn observe(&mut self, losses: &DayLoss<'_>) {
        for e in self.entries.values_mut() {
            e.cum += losses.loss(e.expert);
        }
        self.clock += 1;
    }

    /// `C_i` at the start of `day`, if it is recorded (or implied).
    pub fn value_at(&self, id: EntryId, day: Day) -> Option<f64> {
        let e = self.entries.get(&id)?;
        if day == e.entered {
            Some(0.0)
        } else if day == self.clock {
            Some(e.cum)
        } else {
            e.snapshot(day)
        }
    }

    /// Loss of `id` over days `[from, to)`; `+inf` if it is not observable
    /// (the entry is younger than `from`, or a boundary is not recorded).
    pub fn segment(&self, id: EntryId, from: Day, to: Day) -> f64 {
        let Some(e) = self.entries.get(&id) else {
            return f64::INFINITY;
        };
        if e.entered > from || to < from {
            return f64::INFINITY;
        }
        match (self.value_at(id, from), self.value_at(id, to)) {
            (Some(a), Some(b)) => b - a,
            _ => f64::INFINITY,
        }
    }

    /// Loss of `i` from its own entry up to `j`'s entry; `+inf` when `j`
    /// entered no later than `i`.
    pub fn pair_loss(&self, i: EntryId, j: EntryId) -> f64 {
        let (ei, ej) = (self.entry(i).entered, self.entry(j).entered);
        if ej <= ei {
            f64::INFINITY
        } else {
            self.segment(i, ei, ej)
        }
    }

    /// Stored scalars: id, expert, entry day and `C_i` per entry, plus a
    /// (day, value) pair per snapshot.
    pub fn words(&self) -> usize {
        self.entries
            .values()
            .map(|e| 4 + 2 * e.snapshots.len())
            .sum()
    }
}
