//! Regret accounting on the game side.
//!
//! The per-expert cumulative losses kept here belong to the referee, not the
//! learner, so they are not charged to any learner's memory meter.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::types::{Action, Day, DayLoss};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("expected day {expected}, got day {got}")]
    OutOfOrder { expected: Day, got: Day },
    #[error("action plays expert {expert} but there are only {n} experts")]
    UnknownExpert { expert: usize, n: usize },
    #[error("loss vector has {got} entries, ledger tracks {n}")]
    WidthMismatch { got: usize, n: usize },
}

#[derive(Debug, Clone)]
pub struct RegretLedger {
    next_day: Day,
    cum_alg_loss: f64,
    cum_loss_per_expert: Vec<f64>,
}

impl RegretLedger {
    pub fn new(n: usize) -> Self {
        RegretLedger {
            next_day: 1,
            cum_alg_loss: 0.0,
            cum_loss_per_expert: vec![0.0; n],
        }
    }

    /// Charge `action` against `day` and accumulate every expert's loss.
    /// Returns the loss of the action.
    pub fn record(&mut self, day: &DayLoss<'_>, action: Action) -> Result<f64, LedgerError> {
        if day.day() != self.next_day {
            return Err(LedgerError::OutOfOrder {
                expected: self.next_day,
                got: day.day(),
            });
        }
        let n = self.cum_loss_per_expert.len();
        if day.n() != n {
            return Err(LedgerError::WidthMismatch { got: day.n(), n });
        }
        if let Action::Play(e) = action {
            if e.index() >= n {
                return Err(LedgerError::UnknownExpert {
                    expert: e.index(),
                    n,
                });
            }
        }
        let loss = action.loss(day);
        self.cum_alg_loss += loss;
        for (acc, (_, l)) in self.cum_loss_per_expert.iter_mut().zip(day.iter()) {
            *acc += l;
        }
        self.next_day += 1;
        Ok(loss)
    }

    pub fn days(&self) -> Day {
        self.next_day - 1
    }

    pub fn cum_alg_loss(&self) -> f64 {
        self.cum_alg_loss
    }

    pub fn cum_loss(&self) -> &[f64] {
        &self.cum_loss_per_expert
    }

    /// Cumulative loss of the best expert in hindsight (0 for an empty game).
    pub fn best_expert_loss(&self) -> f64 {
        if self.cum_loss_per_expert.is_empty() {
            return 0.0;
        }
        self.cum_loss_per_expert
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn regret(&self) -> f64 {
        self.cum_alg_loss - self.best_expert_loss()
    }
}
