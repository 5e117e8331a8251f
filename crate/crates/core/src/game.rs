//! The day loop.
//!
//! Each day: the learner commits to an action, the adversary reveals the
//! loss vector (seeing only past actions, plus the current mixed strategy
//! for adversaries that ask for it), the learner observes the losses in a
//! single pass, and the regret ledger and memory meter are brought up to
//! date. Adversaries never get a handle on the learner, so this ordering is
//! enforced by the types rather than by checks.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::ledger::{LedgerError, RegretLedger};
use crate::meter::{MemoryMeter, MemoryReport, MeterError, Metered};
use crate::types::{clamp_losses, Action, Day, DayLoss, ExpertId};

/// An online learner over `experts()` experts.
pub trait Learner: Metered {
    fn experts(&self) -> usize;

    /// Commit to today's action. Called exactly once per day, before the
    /// day's losses exist.
    fn act(&mut self, day: Day) -> Action;

    /// The mixed strategy today's action was drawn from, if the learner
    /// keeps one explicitly. Only the strong adversary asks for it.
    fn current_distribution(&self) -> Option<Vec<f64>> {
        None
    }

    /// Read today's losses. The slice is only valid for this call.
    fn observe(&mut self, losses: &DayLoss<'_>);
}

impl<L: Learner + ?Sized> Learner for alloc::boxed::Box<L> {
    fn experts(&self) -> usize {
        (**self).experts()
    }
    fn act(&mut self, day: Day) -> Action {
        (**self).act(day)
    }
    fn current_distribution(&self) -> Option<Vec<f64>> {
        (**self).current_distribution()
    }
    fn observe(&mut self, losses: &DayLoss<'_>) {
        (**self).observe(losses)
    }
}

impl<M: Metered + ?Sized> Metered for alloc::boxed::Box<M> {
    fn report_memory(&self, out: &mut MemoryReport) {
        (**self).report_memory(out)
    }
}

/// A loss generator.
pub trait Adversary {
    fn experts(&self) -> usize;

    /// Whether [`Adversary::reveal`] wants the learner's current strategy.
    fn wants_strategy(&self) -> bool {
        false
    }

    /// Fill `out` with day `day`'s losses. `strategy` is the learner's mixed
    /// strategy for today when [`Adversary::wants_strategy`] is true (a point
    /// mass on the action when the learner does not expose one), else `None`.
    fn reveal(&mut self, day: Day, strategy: Option<&[f64]>, out: &mut [f64]);

    /// Called after the day is settled with the action that was played.
    fn observe_action(&mut self, _day: Day, _action: Action) {}
}

impl<A: Adversary + ?Sized> Adversary for alloc::boxed::Box<A> {
    fn experts(&self) -> usize {
        (**self).experts()
    }
    fn wants_strategy(&self) -> bool {
        (**self).wants_strategy()
    }
    fn reveal(&mut self, day: Day, strategy: Option<&[f64]>, out: &mut [f64]) {
        (**self).reveal(day, strategy, out)
    }
    fn observe_action(&mut self, day: Day, action: Action) {
        (**self).observe_action(day, action)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("learner has {learner} experts but adversary has {adversary}")]
    WidthMismatch { learner: usize, adversary: usize },
    #[error("horizon must be at least one day")]
    EmptyHorizon,
    #[error("day {day}: learner played expert {expert} outside [0, {n})")]
    InvalidAction {
        day: Day,
        expert: ExpertId,
        n: usize,
    },
    #[error("day {day}: strategy has {got} entries, expected {n}")]
    BadStrategy { day: Day, got: usize, n: usize },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Meter(#[from] MeterError),
}

/// One recorded day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub day: Day,
    pub action: Action,
    pub alg_loss: f64,
    pub best_cum: f64,
    pub regret: f64,
    pub mem_words: usize,
}

/// Result of a game: the recorded rows plus exact end-of-run summaries
/// (which do not depend on the stride).
#[derive(Debug, Clone, PartialEq)]
pub struct GameTrace {
    pub rows: Vec<TraceRow>,
    pub days: Day,
    pub stride: u64,
    pub cum_alg_loss: f64,
    pub best_expert_loss: f64,
    pub regret: f64,
    pub peak_words: usize,
    pub abstentions: u64,
    pub clamped_losses: u64,
    /// Final cumulative loss of every expert.
    pub expert_losses: Vec<f64>,
}

impl GameTrace {
    pub fn average_regret(&self) -> f64 {
        self.regret / self.days as f64
    }

    pub fn average_loss(&self) -> f64 {
        self.cum_alg_loss / self.days as f64
    }
}

/// Optional per-day hook, used by tests to watch the game without touching
/// the protocol.
pub trait DayObserver {
    fn on_day(&mut self, day: Day, action: Action, losses: &[f64], memory: &MemoryReport);
}

impl DayObserver for () {
    fn on_day(&mut self, _: Day, _: Action, _: &[f64], _: &MemoryReport) {}
}

/// Play `horizon` days, recording every `stride`-th day (and always the
/// last one).
pub fn run_game<L, A>(
    learner: &mut L,
    adversary: &mut A,
    horizon: Day,
    stride: u64,
) -> Result<GameTrace, GameError>
where
    L: Learner + ?Sized,
    A: Adversary + ?Sized,
{
    run_game_observed(learner, adversary, horizon, stride, &mut ())
}

pub fn run_game_observed<L, A, O>(
    learner: &mut L,
    adversary: &mut A,
    horizon: Day,
    stride: u64,
    hook: &mut O,
) -> Result<GameTrace, GameError>
where
    L: Learner + ?Sized,
    A: Adversary + ?Sized,
    O: DayObserver + ?Sized,
{
    let n = learner.experts();
    if adversary.experts() != n {
        return Err(GameError::WidthMismatch {
            learner: n,
            adversary: adversary.experts(),
        });
    }
    if horizon == 0 {
        return Err(GameError::EmptyHorizon);
    }
    let stride = stride.max(1);
    let mut ledger = RegretLedger::new(n);
    let mut meter = MemoryMeter::new();
    let mut report = MemoryReport::new();
    let mut buf = vec![0.0; n];
    let mut rows = Vec::with_capacity((horizon / stride) as usize + 1);
    let mut abstentions = 0;
    let mut clamped = 0u64;
    let wants = adversary.wants_strategy();

    for day in 1..=horizon {
        let action = learner.act(day);
        if let Action::Play(e) = action {
            if e.index() >= n {
                return Err(GameError::InvalidAction { day, expert: e, n });
            }
        } else {
            abstentions += 1;
        }

        if wants {
            let p = match learner.current_distribution() {
                Some(p) => {
                    if p.len() != n {
                        return Err(GameError::BadStrategy {
                            day,
                            got: p.len(),
                            n,
                        });
                    }
                    p
                }
                None => {
                    let mut p = vec![0.0; n];
                    if let Action::Play(e) = action {
                        p[e.index()] = 1.0;
                    }
                    p
                }
            };
            adversary.reveal(day, Some(&p), &mut buf);
        } else {
            adversary.reveal(day, None, &mut buf);
        }
        let fixed = clamp_losses(&mut buf);
        if fixed > 0 {
            log::warn!("day {day}: clamped {fixed} losses into [0, 1]");
            clamped += fixed as u64;
        }

        let losses = DayLoss::trusted(day, &buf);
        learner.observe(&losses);
        let alg_loss = ledger.record(&losses, action)?;
        adversary.observe_action(day, action);

        report.clear();
        learner.report_memory(&mut report);
        meter.reconcile(&report)?;
        hook.on_day(day, action, &buf, &report);

        if day % stride == 0 || day == horizon {
            rows.push(TraceRow {
                day,
                action,
                alg_loss,
                best_cum: ledger.best_expert_loss(),
                regret: ledger.regret(),
                mem_words: meter.current_words(),
            });
        }
    }
    let peak_words = meter.peak_words();
    meter.close()?;
    Ok(GameTrace {
        rows,
        days: horizon,
        stride,
        cum_alg_loss: ledger.cum_alg_loss(),
        best_expert_loss: ledger.best_expert_loss(),
        regret: ledger.regret(),
        peak_words,
        abstentions,
        clamped_losses: clamped,
        expert_losses: ledger.cum_loss().to_vec(),
    })
}
