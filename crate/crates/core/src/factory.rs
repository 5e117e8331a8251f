//! Learners and adversaries from a [`Resolved`] configuration.
//!
//! The learner draws from `seed/learner` and the adversary from
//! `seed/adversary`, so two learners run with the same seed face the same
//! oblivious stream.

use alloc::boxed::Box;
use alloc::sync::Arc;

use crate::adaptive::{AdaptiveConstants, AdaptiveLearner};
use crate::adversary::{
    DisjointnessAdversary, IidAdversary, Noise, PlantedAdversary, StrongAdversary,
    TwoPhaseAdversary,
};
use crate::config::{AdversaryKind, AlgorithmKind, ConfigError, Resolved};
use crate::game::{run_game, Adversary, GameError, GameTrace, Learner};
use crate::hedge::{GroupedLearner, MwuLearner, SquintGrid, SquintHedge};
use crate::oblivious::ObliviousFull;
use crate::pool::Baseline;
use crate::rng::RandomnessSource;

pub type DynLearner = Box<dyn Learner + Send>;
pub type DynAdversary = Box<dyn Adversary + Send>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Game(#[from] GameError),
}

fn grid(r: &Resolved) -> Result<Arc<SquintGrid>, ConfigError> {
    SquintGrid::new(r.constants.squint_points)
        .map(Arc::new)
        .map_err(|_| ConfigError::BadConstant {
            key: "squint_points".into(),
            value: alloc::format!("{}", r.constants.squint_points),
            reason: "must be odd and at least 3",
        })
}

pub fn build_learner(r: &Resolved) -> Result<DynLearner, ConfigError> {
    let c = &r.config;
    let (n, horizon) = (c.n, c.horizon);
    let src = RandomnessSource::new(c.seed).fork("learner");
    let k = &r.constants;
    Ok(match c.algorithm {
        AlgorithmKind::Mwu => match c.space_budget {
            Some(s) if s < n => Box::new(MwuLearner::tracked(n, s, horizon, &src)),
            _ => Box::new(MwuLearner::new(n, horizon, &src)),
        },
        AlgorithmKind::SquintHedge => Box::new(SquintHedge::new(n, grid(r)?, &src)),
        AlgorithmKind::Baseline => Box::new(Baseline::new(
            n,
            horizon,
            r.epoch_len.expect("resolved epoch"),
            k.pool,
            &src,
        )),
        AlgorithmKind::ObliviousFull | AlgorithmKind::GroupedOblivious => {
            let g = grid(r)?;
            // shapes were checked by `resolve`
            Box::new(
                GroupedLearner::new(n, r.groups, horizon, &src, |_, size, s| {
                    ObliviousFull::new(size, horizon, k.max_threads, k.pool, g.clone(), s)
                        .expect("validated group shape")
                })
                .map_err(|_| ConfigError::BadGroups {
                    groups: r.groups,
                    n,
                })?,
            )
        }
        AlgorithmKind::Adaptive | AlgorithmKind::GroupedAdaptive => {
            let g = grid(r)?;
            let eps = r.epsilon.expect("resolved epsilon");
            let consts: AdaptiveConstants = k.adaptive;
            Box::new(
                GroupedLearner::new(n, r.groups, horizon, &src, |_, size, s| {
                    AdaptiveLearner::new(size, horizon, eps, consts, g.clone(), s)
                        .expect("validated schedule")
                })
                .map_err(|_| ConfigError::BadGroups {
                    groups: r.groups,
                    n,
                })?,
            )
        }
    })
}

pub fn build_adversary(r: &Resolved) -> Result<DynAdversary, ConfigError> {
    let c = &r.config;
    let (n, horizon) = (c.n, c.horizon);
    let src = RandomnessSource::new(c.seed).fork("adversary");
    let k = &r.constants;
    let noise = if k.bernoulli {
        Noise::Bernoulli
    } else {
        Noise::Uniform { width: k.noise }
    };
    Ok(match c.adversary {
        AdversaryKind::Iid if k.bernoulli => Box::new(IidAdversary::bernoulli(n, &src)),
        AdversaryKind::Iid => Box::new(IidAdversary::uniform(n, &src)),
        AdversaryKind::Planted => {
            Box::new(PlantedAdversary::new(n, k.gap.unwrap_or(0.2), noise, &src))
        }
        AdversaryKind::TwoPhase => Box::new(TwoPhaseAdversary::new(
            n,
            horizon,
            k.gap.unwrap_or(0.5),
            noise,
            &src,
        )),
        AdversaryKind::Disjointness => {
            let m = r.block_size.expect("resolved block size");
            let eps = m as f64 / libm::sqrt(n as f64);
            Box::new(DisjointnessAdversary::new(n, eps, &src)?)
        }
        AdversaryKind::Strong => Box::new(StrongAdversary::new(
            n,
            c.space_budget.expect("resolved budget"),
            &src,
        )?),
    })
}

/// Resolve, build and play one game.
pub fn run_config(
    config: &crate::config::GameConfig,
    stride: u64,
) -> Result<(Resolved, GameTrace), RunError> {
    let r = config.resolve()?;
    let mut learner = build_learner(&r)?;
    let mut adversary = build_adversary(&r)?;
    let trace = run_game(&mut learner, &mut adversary, config.horizon, stride)?;
    Ok((r, trace))
}
