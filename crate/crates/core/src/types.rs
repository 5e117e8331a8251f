//! Experts, days, actions and the per-day loss vector.

use core::fmt;

use thiserror::Error;

/// Days are 1-based: the first day of a game is day 1.
pub type Day = u64;

/// Index of an expert in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExpertId(pub u32);

impl ExpertId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        ExpertId(i as u32)
    }
}

impl fmt::Display for ExpertId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What a learner commits to on a day.
///
/// `Abstain` is the sentinel used when a component has nothing to play; it
/// is charged unit loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Play(ExpertId),
    Abstain,
}

impl Action {
    /// Loss of this action under `day`'s losses.
    #[inline]
    pub fn loss(self, day: &DayLoss<'_>) -> f64 {
        match self {
            Action::Play(e) => day.loss(e),
            Action::Abstain => 1.0,
        }
    }

    pub fn expert(self) -> Option<ExpertId> {
        match self {
            Action::Play(e) => Some(e),
            Action::Abstain => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Play(e) => write!(f, "{e}"),
            Action::Abstain => f.write_str("abstain"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("day must be >= 1")]
    ZeroDay,
    #[error("loss of expert {expert} on day {day} is {value}, outside [0, 1]")]
    OutOfRange { day: Day, expert: usize, value: f64 },
}

/// Losses of every expert on one day.
///
/// The learner reads it once while observing and must not retain it; the
/// slice is owned by the game loop.
#[derive(Debug, Clone, Copy)]
pub struct DayLoss<'a> {
    day: Day,
    losses: &'a [f64],
}

impl<'a> DayLoss<'a> {
    /// Validating constructor: every entry must lie in `[0, 1]`.
    pub fn new(day: Day, losses: &'a [f64]) -> Result<Self, LossError> {
        if day == 0 {
            return Err(LossError::ZeroDay);
        }
        if let Some((expert, &value)) = losses
            .iter()
            .enumerate()
            .find(|(_, &v)| !(0.0..=1.0).contains(&v))
        {
            return Err(LossError::OutOfRange { day, expert, value });
        }
        Ok(DayLoss { day, losses })
    }

    /// Constructor for slices already known to be valid (sub-views of a
    /// validated day).
    pub(crate) fn trusted(day: Day, losses: &'a [f64]) -> Self {
        debug_assert!(day >= 1);
        DayLoss { day, losses }
    }

    #[inline]
    pub fn day(&self) -> Day {
        self.day
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.losses.len()
    }

    #[inline]
    pub fn loss(&self, e: ExpertId) -> f64 {
        self.losses[e.index()]
    }

    /// Single pass over `(expert, loss)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (ExpertId, f64)> + 'a {
        self.losses
            .iter()
            .enumerate()
            .map(|(i, &l)| (ExpertId::from_index(i), l))
    }

    /// The losses of the contiguous expert range `start..start + len`,
    /// re-indexed from zero.
    pub fn slice(&self, start: usize, len: usize) -> DayLoss<'a> {
        DayLoss::trusted(self.day, &self.losses[start..start + len])
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.losses
    }
}

/// Clamp every entry into `[0, 1]` (NaN becomes 1). Returns how many
/// entries were changed.
pub fn clamp_losses(losses: &mut [f64]) -> usize {
    let mut changed = 0;
    for l in losses.iter_mut() {
        let c = if l.is_nan() { 1.0 } else { l.clamp(0.0, 1.0) };
        if c != *l {
            changed += 1;
        }
        *l = c;
    }
    changed
}
