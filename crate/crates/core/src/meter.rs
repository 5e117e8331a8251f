//! Word-level memory metering.
//!
//! One word is one stored scalar: an expert id, a loss accumulator, a
//! weight, a day stamp, a snapshot cell. Learners describe what they retain
//! through [`Metered`]; the game loop reconciles that description with a
//! [`MemoryMeter`] at the end of every day, charging growth and discharging
//! shrinkage per component label.

use alloc::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeterError {
    #[error("discharging {words} words from `{label}` which holds {held}")]
    Underflow {
        label: &'static str,
        words: usize,
        held: usize,
    },
    #[error("meter still holds {0} words at end of run")]
    Unbalanced(usize),
}

/// Words currently retained, grouped by component label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryReport {
    by_label: BTreeMap<&'static str, usize>,
}

impl MemoryReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, label: &'static str, words: usize) {
        *self.by_label.entry(label).or_insert(0) += words;
    }

    pub fn total(&self) -> usize {
        self.by_label.values().sum()
    }

    pub fn get(&self, label: &str) -> usize {
        self.by_label.get(label).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, usize)> + '_ {
        self.by_label.iter().map(|(k, v)| (*k, *v))
    }

    pub fn clear(&mut self) {
        self.by_label.clear();
    }
}

/// Anything that retains state across days.
pub trait Metered {
    fn report_memory(&self, out: &mut MemoryReport);

    fn memory_words(&self) -> usize {
        let mut r = MemoryReport::new();
        self.report_memory(&mut r);
        r.total()
    }
}

#[derive(Debug, Clone, Default)]
pub struct MemoryMeter {
    current: usize,
    peak: usize,
    held: BTreeMap<&'static str, usize>,
    peak_by_label: BTreeMap<&'static str, usize>,
}

impl MemoryMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, words: usize, label: &'static str) {
        let h = self.held.entry(label).or_insert(0);
        *h += words;
        let p = self.peak_by_label.entry(label).or_insert(0);
        *p = (*p).max(*h);
        self.current += words;
        self.peak = self.peak.max(self.current);
    }

    pub fn discharge(&mut self, words: usize, label: &'static str) -> Result<(), MeterError> {
        let held = self.held.get(label).copied().unwrap_or(0);
        if words > held {
            return Err(MeterError::Underflow { label, words, held });
        }
        self.held.insert(label, held - words);
        self.current -= words;
        Ok(())
    }

    /// Bring every label's charge to the level stated in `report`.
    pub fn reconcile(&mut self, report: &MemoryReport) -> Result<(), MeterError> {
        // Discharge first so the peak reflects the retained state, not a
        // transient sum of old and new.
        let labels: alloc::vec::Vec<&'static str> = self.held.keys().copied().collect();
        for label in labels {
            let held = self.held[label];
            let want = report.get(label);
            if want < held {
                self.discharge(held - want, label)?;
            }
        }
        for (label, want) in report.iter() {
            let held = self.held.get(label).copied().unwrap_or(0);
            if want > held {
                self.charge(want - held, label);
            }
        }
        Ok(())
    }

    /// Discharge everything; fails if any label was over-discharged along
    /// the way (which `discharge` already rejects) or the books do not close.
    pub fn close(&mut self) -> Result<(), MeterError> {
        let labels: alloc::vec::Vec<(&'static str, usize)> =
            self.held.iter().map(|(k, v)| (*k, *v)).collect();
        for (label, held) in labels {
            self.discharge(held, label)?;
        }
        if self.current != 0 {
            return Err(MeterError::Unbalanced(self.current));
        }
        Ok(())
    }

    pub fn current_words(&self) -> usize {
        self.current
    }

    pub fn peak_words(&self) -> usize {
        self.peak
    }

    pub fn peak_for(&self, label: &str) -> usize {
        self.peak_by_label.get(label).copied().unwrap_or(0)
    }

    pub fn held_for(&self, label: &str) -> usize {
        self.held.get(label).copied().unwrap_or(0)
    }
}
