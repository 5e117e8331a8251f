//! Game parameters and their validation.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::adaptive::{epsilon_exponent, AdaptiveConstants, AdaptiveError, AdaptiveSchedule};
use crate::adversary::{block_size, AdversaryError};
use crate::math::floor_log2;
use crate::oblivious::{ScheduleError, ThreadSchedule};
use crate::pool::{default_epoch_len, PoolConstants};
use crate::types::Day;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("unknown adversary {0:?}")]
    UnknownAdversary(String),
    #[error("unknown constant mode {0:?}")]
    UnknownMode(String),
    #[error("unknown constant {0:?}")]
    UnknownConstant(String),
    #[error("constant {key} = {value:?}: {reason}")]
    BadConstant {
        key: String,
        value: String,
        reason: &'static str,
    },
    #[error("override {0:?} is not KEY=VALUE")]
    BadOverride(String),
    #[error("n must be at least 1")]
    NoExperts,
    #[error("T must be at least 1")]
    EmptyHorizon,
    #[error("epoch length {epoch} must lie in [1, T = {horizon}]")]
    BadEpochLength { epoch: Day, horizon: Day },
    #[error("{algorithm} needs --epsilon or --space-budget")]
    MissingEpsilon { algorithm: &'static str },
    #[error("{what} needs --space-budget")]
    MissingBudget { what: &'static str },
    #[error("{groups} groups is not a power of two in [1, n = {n}]")]
    BadGroups { groups: usize, n: usize },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident, $err:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = ConfigError;

            fn from_str(s: &str) -> Result<Self, ConfigError> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|k| k.name() == s)
                    .ok_or_else(|| ConfigError::$err(s.to_owned()))
            }
        }
    };
}

named_enum!(AlgorithmKind, UnknownAlgorithm {
    Mwu => "mwu",
    SquintHedge => "squint-hedge",
    Baseline => "baseline",
    ObliviousFull => "oblivious-full",
    GroupedOblivious => "grouped-oblivious",
    Adaptive => "adaptive",
    GroupedAdaptive => "grouped-adaptive",
});

named_enum!(AdversaryKind, UnknownAdversary {
    Iid => "iid",
    Planted => "planted",
    TwoPhase => "two-phase",
    Disjointness => "disjointness",
    Strong => "strong",
});

named_enum!(
    /// `Paper` uses the polylogarithmic constants, `Desk` small fixed ones.
    ConstantMode, UnknownMode {
        Paper => "paper",
        Desk => "desk",
    }
);

/// Every tunable constant. Unset optional entries fall back to a value
/// derived from the other parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub pool: PoolConstants,
    pub max_threads: usize,
    pub adaptive: AdaptiveConstants,
    pub squint_points: usize,
    pub epoch_len: Option<Day>,
    pub groups: Option<usize>,
    /// Mean gap of the planted and two-phase streams.
    pub gap: Option<f64>,
    /// Width of the uniform noise around the means.
    pub noise: f64,
    /// Use coin flips instead of uniform noise.
    pub bernoulli: bool,
}

impl Constants {
    pub const KEYS: &'static [&'static str] = &[
        "sample_rate",
        "size_threshold",
        "pool_cap",
        "merge_iters",
        "max_threads",
        "c_n",
        "c_adm",
        "squint_points",
        "epoch_len",
        "groups",
        "gap",
        "noise",
        "bernoulli",
    ];

    pub fn for_mode(mode: ConstantMode, n: usize, horizon: Day) -> Self {
        let (pool, adaptive, max_threads) = match mode {
            ConstantMode::Desk => (PoolConstants::DESK, AdaptiveConstants::DESK, 6),
            ConstantMode::Paper => (
                PoolConstants::paper(n, horizon),
                AdaptiveConstants::paper(n, horizon),
                64,
            ),
        };
        Constants {
            pool,
            max_threads,
            adaptive,
            squint_points: crate::hedge::DEFAULT_GRID_POINTS,
            epoch_len: None,
            groups: None,
            gap: None,
            noise: 0.5,
            bernoulli: false,
        }
    }

    /// Set one constant from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn bad(key: &str, value: &str, reason: &'static str) -> ConfigError {
            ConfigError::BadConstant {
                key: key.to_owned(),
                value: value.to_owned(),
                reason,
            }
        }
        let real = || -> Result<f64, ConfigError> {
            value
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(key, value, "not a finite number"))
        };
        let count = || -> Result<usize, ConfigError> {
            value
                .parse::<usize>()
                .map_err(|_| bad(key, value, "not a non-negative integer"))
        };
        let positive = |x: usize| {
            if x == 0 {
                Err(bad(key, value, "must be positive"))
            } else {
                Ok(x)
            }
        };
        match key {
            "sample_rate" => {
                let x = real()?;
                if !(x > 0.0 && x <= 1.0) {
                    return Err(bad(key, value, "must lie in (0, 1]"));
                }
                self.pool.sample_rate = x;
            }
            "size_threshold" => {
                let x = real()?;
                if x < 0.0 {
                    return Err(bad(key, value, "must be non-negative"));
                }
                self.pool.size_threshold = x;
            }
            "pool_cap" => self.pool.pool_cap = positive(count()?)?,
            "merge_iters" => self.pool.merge_iters = positive(count()?)?,
            "max_threads" => self.max_threads = positive(count()?)?,
            "c_n" => {
                let x = real()?;
                if x <= 0.0 {
                    return Err(bad(key, value, "must be positive"));
                }
                self.adaptive.c_n = x;
            }
            "c_adm" => {
                let x = real()?;
                if x < 0.0 {
                    return Err(bad(key, value, "must be non-negative"));
                }
                self.adaptive.c_adm = x;
            }
            "squint_points" => {
                let x = count()?;
                if x < 3 || x % 2 == 0 {
                    return Err(bad(key, value, "must be odd and at least 3"));
                }
                self.squint_points = x;
            }
            "epoch_len" => self.epoch_len = Some(positive(count()?)? as Day),
            "groups" => self.groups = Some(positive(count()?)?),
            "gap" => {
                let x = real()?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(bad(key, value, "must lie in [0, 1]"));
                }
                self.gap = Some(x);
            }
            "noise" => {
                let x = real()?;
                if x < 0.0 {
                    return Err(bad(key, value, "must be non-negative"));
                }
                self.noise = x;
            }
            "bernoulli" => {
                self.bernoulli = match value {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    _ => return Err(bad(key, value, "must be true/false or 1/0")),
                }
            }
            _ => return Err(ConfigError::UnknownConstant(key.to_owned())),
        }
        Ok(())
    }
}

/// Split `KEY=VALUE`.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_owned(), v.trim().to_owned())),
        _ => Err(ConfigError::BadOverride(s.to_owned())),
    }
}

/// One game as requested.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub n: usize,
    pub horizon: Day,
    pub epsilon: Option<f64>,
    pub space_budget: Option<usize>,
    pub algorithm: AlgorithmKind,
    pub adversary: AdversaryKind,
    pub mode: ConstantMode,
    /// `KEY=VALUE` constant overrides, applied in order.
    pub overrides: Vec<(String, String)>,
    pub seed: u64,
}

impl GameConfig {
    pub fn new(n: usize, horizon: Day, algorithm: AlgorithmKind, adversary: AdversaryKind) -> Self {
        GameConfig {
            n,
            horizon,
            epsilon: None,
            space_budget: None,
            algorithm,
            adversary,
            mode: ConstantMode::Desk,
            overrides: Vec::new(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn with_budget(mut self, s: usize) -> Self {
        self.space_budget = Some(s);
        self
    }

    pub fn with_override(mut self, key: &str, value: &str) -> Self {
        self.overrides.push((key.to_owned(), value.to_owned()));
        self
    }

    /// Validate and work out every derived parameter.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let (n, horizon) = (self.n, self.horizon);
        if n == 0 {
            return Err(ConfigError::NoExperts);
        }
        if horizon == 0 {
            return Err(ConfigError::EmptyHorizon);
        }
        let mut constants = Constants::for_mode(self.mode, n, horizon);
        for (k, v) in &self.overrides {
            constants.set(k, v)?;
        }
        let mut r = Resolved {
            config: self.clone(),
            constants,
            groups: 1,
            epoch_len: None,
            threads: None,
            epsilon: None,
            block_size: None,
        };
        match self.algorithm {
            AlgorithmKind::Mwu | AlgorithmKind::SquintHedge => {}
            AlgorithmKind::Baseline => {
                let b = constants
                    .epoch_len
                    .unwrap_or_else(|| default_epoch_len(n, horizon));
                if b == 0 || b > horizon {
                    return Err(ConfigError::BadEpochLength { epoch: b, horizon });
                }
                r.epoch_len = Some(b);
            }
            AlgorithmKind::ObliviousFull | AlgorithmKind::GroupedOblivious => {
                let g = if self.algorithm == AlgorithmKind::ObliviousFull {
                    1
                } else {
                    constants
                        .groups
                        .unwrap_or_else(|| oblivious_groups(n, horizon, self.space_budget))
                };
                if !g.is_power_of_two() || g > n {
                    return Err(ConfigError::BadGroups { groups: g, n });
                }
                let s = ThreadSchedule::new(n / g, horizon, constants.max_threads)?;
                r.groups = g;
                r.threads = Some(s.threads());
                r.epoch_len = Some(s.epoch_len(1));
            }
            AlgorithmKind::Adaptive | AlgorithmKind::GroupedAdaptive => {
                let g = if self.algorithm == AlgorithmKind::Adaptive {
                    1
                } else {
                    constants.groups.unwrap_or(match self.space_budget {
                        Some(s) if horizon <= s as Day => (s / horizon as usize).clamp(1, n),
                        _ => 1,
                    })
                };
                if g == 0 || g > n {
                    return Err(ConfigError::BadGroups { groups: g, n });
                }
                let per_group = n.div_ceil(g);
                let eps = match (self.epsilon, self.space_budget) {
                    (Some(e), _) => e,
                    (None, Some(s)) => epsilon_for_budget(per_group, (s / g).max(1)),
                    (None, None) => {
                        return Err(ConfigError::MissingEpsilon {
                            algorithm: self.algorithm.name(),
                        })
                    }
                };
                let s = AdaptiveSchedule::new(per_group, horizon, eps, constants.adaptive.c_n)?;
                if self.mode == ConstantMode::Paper && constants.adaptive.c_n > per_group as f64 {
                    log::warn!(
                        "paper-mode sample width multiplier {:.1} exceeds n = {per_group}",
                        constants.adaptive.c_n
                    );
                }
                r.groups = g;
                r.epsilon = Some(eps);
                r.threads = Some(s.threads());
                r.epoch_len = Some(s.epoch_len());
            }
        }
        match self.adversary {
            AdversaryKind::Iid | AdversaryKind::Planted | AdversaryKind::TwoPhase => {}
            AdversaryKind::Disjointness => {
                let eps = match (self.epsilon, self.space_budget, r.epsilon) {
                    (Some(e), _, _) => e,
                    (None, _, Some(e)) => e,
                    (None, Some(s), None) => epsilon_for_budget(n, s),
                    (None, None, None) => {
                        return Err(ConfigError::MissingEpsilon {
                            algorithm: "the disjointness adversary",
                        })
                    }
                };
                let m = block_size(n, eps)?;
                r.block_size = Some(m);
                log::info!(
                    "disjointness: block size {m}, effective eps = {:.4}",
                    m as f64 / libm::sqrt(n as f64)
                );
            }
            AdversaryKind::Strong => {
                let s = self.space_budget.ok_or(ConfigError::MissingBudget {
                    what: "the strong adversary",
                })?;
                if s == 0 || 10 * s > n {
                    return Err(AdversaryError::BudgetTooLarge { special: 10 * s, n }.into());
                }
            }
        }
        Ok(r)
    }
}

/// Largest `eps = 2^-k`, `k >= 1`, with `sqrt(n)/eps <= budget`.
pub fn epsilon_for_budget(n: usize, budget: usize) -> f64 {
    let ratio = budget as f64 / libm::sqrt(n as f64);
    let k = if ratio >= 2.0 {
        libm::floor(libm::log2(ratio)) as i32
    } else {
        1
    };
    libm::ldexp(1.0, -k.clamp(1, 30))
}

/// `G = 2^floor(log2(max(1, S / ceil(log2(nT)))))`, capped at `n / 2` so
/// every group keeps two experts; 1 without a budget.
pub fn oblivious_groups(n: usize, horizon: Day, budget: Option<usize>) -> usize {
    let Some(s) = budget else { return 1 };
    let log = libm::ceil(libm::log2((n as f64 * horizon as f64).max(2.0))) as usize;
    let g = (s / log.max(1)).max(1);
    let g = 1usize << floor_log2(g as u64);
    g.min((n / 2).max(1))
}

/// A validated configuration plus the parameters derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: GameConfig,
    pub constants: Constants,
    pub groups: usize,
    /// Baseline epoch, first-thread epoch, or adaptive epoch.
    pub epoch_len: Option<Day>,
    pub threads: Option<usize>,
    /// Learner accuracy `eps` for the adaptive algorithms.
    pub epsilon: Option<f64>,
    /// Block size `M` of the disjointness adversary.
    pub block_size: Option<usize>,
}

impl Resolved {
    /// Effective adversary accuracy `M / sqrt(n)`.
    pub fn adversary_epsilon(&self) -> Option<f64> {
        self.block_size
            .map(|m| m as f64 / libm::sqrt(self.config.n as f64))
    }

    /// Whether the adaptive accuracy is exactly `2^-k`.
    pub fn epsilon_is_dyadic(&self) -> bool {
        self.epsilon.is_some_and(|e| epsilon_exponent(e).is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn cfg(algo: AlgorithmKind) -> GameConfig {
        GameConfig::new(32, 1 << 12, algo, AdversaryKind::TwoPhase)
    }

    #[test]
    fn names_round_trip() {
        for a in AlgorithmKind::ALL {
            assert_eq!(a.name().parse::<AlgorithmKind>().unwrap(), *a);
        }
        for a in AdversaryKind::ALL {
            assert_eq!(a.to_string().parse::<AdversaryKind>().unwrap(), *a);
        }
        assert_eq!(
            "paper".parse::<ConstantMode>().unwrap(),
            ConstantMode::Paper
        );
        assert!("hedge".parse::<AlgorithmKind>().is_err());
    }

    #[test]
    fn overrides_apply() {
        let r = cfg(AlgorithmKind::Baseline)
            .with_override("epoch_len", "64")
            .with_override("pool_cap", "10")
            .resolve()
            .unwrap();
        assert_eq!(r.epoch_len, Some(64));
        assert_eq!(r.constants.pool.pool_cap, 10);
        assert_eq!(
            cfg(AlgorithmKind::Mwu).with_override("nope", "1").resolve(),
            Err(ConfigError::UnknownConstant("nope".into()))
        );
        assert!(matches!(
            cfg(AlgorithmKind::Mwu)
                .with_override("squint_points", "40")
                .resolve(),
            Err(ConfigError::BadConstant { .. })
        ));
        assert_eq!(
            parse_override("gap=0.3").unwrap(),
            ("gap".into(), "0.3".into())
        );
        assert!(parse_override("gap").is_err());
    }

    #[test]
    fn oblivious_shapes() {
        let r = cfg(AlgorithmKind::ObliviousFull).resolve().unwrap();
        assert_eq!(r.threads, Some(6));
        assert_eq!(r.epoch_len, Some(128));
        let mut c = cfg(AlgorithmKind::ObliviousFull);
        c.n = 24;
        assert!(matches!(c.resolve(), Err(ConfigError::Schedule(_))));
        c.n = 32;
        c.horizon = 32;
        assert!(matches!(c.resolve(), Err(ConfigError::Schedule(_))));
    }

    #[test]
    fn grouped_oblivious_groups() {
        // ceil(log2(32 * 4096)) = 17
        assert_eq!(oblivious_groups(32, 4096, None), 1);
        assert_eq!(oblivious_groups(32, 4096, Some(40)), 2);
        assert_eq!(oblivious_groups(32, 4096, Some(17 * 7)), 4);
        assert_eq!(oblivious_groups(32, 4096, Some(1 << 20)), 16);
        let r = cfg(AlgorithmKind::GroupedOblivious)
            .with_override("groups", "4")
            .resolve()
            .unwrap();
        assert_eq!(r.groups, 4);
        assert!(cfg(AlgorithmKind::GroupedOblivious)
            .with_override("groups", "3")
            .resolve()
            .is_err());
    }

    #[test]
    fn adaptive_epsilon() {
        let mut c = cfg(AlgorithmKind::Adaptive);
        assert!(matches!(
            c.resolve(),
            Err(ConfigError::MissingEpsilon { .. })
        ));
        c.epsilon = Some(0.25);
        assert_eq!(c.resolve().unwrap().epoch_len, Some(16));
        c.epsilon = Some(0.2);
        assert!(matches!(
            c.resolve(),
            Err(ConfigError::Adaptive(AdaptiveError::BadEpsilon(_)))
        ));
        c.epsilon = Some(1.0 / 128.0);
        // 1/eps^2 = 16384 does not divide 4096
        assert!(matches!(
            c.resolve(),
            Err(ConfigError::Adaptive(
                AdaptiveError::EpochDoesNotDivide { .. }
            ))
        ));
        c.epsilon = None;
        c.n = 144;
        c.horizon = 2048;
        c.space_budget = Some(48);
        assert_eq!(c.resolve().unwrap().epsilon, Some(0.25));
    }

    #[test]
    fn budget_to_epsilon() {
        assert_eq!(epsilon_for_budget(144, 48), 0.25);
        assert_eq!(epsilon_for_budget(144, 60), 0.25);
        assert_eq!(epsilon_for_budget(144, 96), 0.125);
        assert_eq!(epsilon_for_budget(144, 5), 0.5);
    }

    #[test]
    fn grouped_adaptive_regime() {
        let mut c = GameConfig::new(64, 256, AlgorithmKind::GroupedAdaptive, AdversaryKind::Iid)
            .with_epsilon(0.25);
        assert_eq!(c.resolve().unwrap().groups, 1);
        c.space_budget = Some(1024);
        assert_eq!(c.resolve().unwrap().groups, 4);
    }

    #[test]
    fn adversary_requirements() {
        let mut c = GameConfig::new(144, 2160, AlgorithmKind::Mwu, AdversaryKind::Disjointness);
        assert!(c.resolve().is_err());
        c.epsilon = Some(1.0 / 3.0);
        let r = c.resolve().unwrap();
        assert_eq!(r.block_size, Some(4));
        assert!((r.adversary_epsilon().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        c.n = 9;
        assert!(matches!(c.resolve(), Err(ConfigError::Adversary(_))));

        let mut c = GameConfig::new(100, 2000, AlgorithmKind::Mwu, AdversaryKind::Strong);
        assert!(matches!(
            c.resolve(),
            Err(ConfigError::MissingBudget { .. })
        ));
        c.space_budget = Some(10);
        assert!(c.resolve().is_ok());
        c.space_budget = Some(11);
        assert!(c.resolve().is_err());
    }

    #[test]
    fn paper_mode_constants() {
        let mut c = cfg(AlgorithmKind::Baseline);
        c.mode = ConstantMode::Paper;
        let r = c.resolve().unwrap();
        assert_eq!(r.constants.pool, PoolConstants::paper(32, 4096));
        assert_eq!(r.constants.adaptive, AdaptiveConstants::paper(32, 4096));
    }

    #[test]
    fn baseline_epoch_checked() {
        assert!(matches!(
            cfg(AlgorithmKind::Baseline)
                .with_override("epoch_len", "8192")
                .resolve(),
            Err(ConfigError::BadEpochLength { .. })
        ));
    }
}
