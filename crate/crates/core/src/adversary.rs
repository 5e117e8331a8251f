//! Loss generators.
//!
//! Oblivious streams ([`IidAdversary`], [`PlantedAdversary`],
//! [`TwoPhaseAdversary`]) never look at the learner. The set-disjointness
//! adversary ([`DisjointnessAdversary`]) sees the actions played so far, and
//! the [`StrongAdversary`] additionally sees today's mixed strategy.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::game::Adversary;
use crate::rng::{RandomnessSource, StreamRng};
use crate::types::{Action, Day, ExpertId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("no block size M >= 4 with M = 1 mod 3 divides n = {n} (target {target})")]
    NoBlockSize { n: usize, target: usize },
    #[error("special set of {special} experts does not fit in n = {n}")]
    BudgetTooLarge { special: usize, n: usize },
    #[error("strategy is not a probability distribution over {n} experts")]
    NotADistribution { n: usize },
    #[error("strategy has {got} entries, expected {n}")]
    StrategyWidth { got: usize, n: usize },
}

/// How a per-expert mean turns into a realized loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// Loss is 1 with probability equal to the mean, else 0.
    Bernoulli,
    /// Mean plus `width * (u - 1/2)` for uniform `u`, clamped into `[0, 1]`.
    Uniform { width: f64 },
}

impl Noise {
    fn draw(self, mean: f64, rng: &mut StreamRng) -> f64 {
        match self {
            Noise::Bernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            Noise::Uniform { width } => {
                if width == 0.0 {
                    mean.clamp(0.0, 1.0)
                } else {
                    (mean + width * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0)
                }
            }
        }
    }
}

/// Independent losses every day, uniform on `[0, 1]` or fair coins.
#[derive(Debug, Clone)]
pub struct IidAdversary {
    n: usize,
    bernoulli: bool,
    rng: StreamRng,
}

impl IidAdversary {
    pub fn uniform(n: usize, source: &RandomnessSource) -> Self {
        IidAdversary {
            n,
            bernoulli: false,
            rng: source.fork("iid").rng(),
        }
    }

    pub fn bernoulli(n: usize, source: &RandomnessSource) -> Self {
        IidAdversary {
            bernoulli: true,
            ..Self::uniform(n, source)
        }
    }
}

impl Adversary for IidAdversary {
    fn experts(&self) -> usize {
        self.n
    }

    fn reveal(&mut self, _: Day, _: Option<&[f64]>, out: &mut [f64]) {
        for x in out.iter_mut() {
            let u: f64 = self.rng.gen();
            *x = if self.bernoulli {
                if u < 0.5 {
                    1.0
                } else {
                    0.0
                }
            } else {
                u
            };
        }
    }
}

/// One planted expert with mean `(1 - gap)/2`; everyone else `(1 + gap)/2`.
#[derive(Debug, Clone)]
pub struct PlantedAdversary {
    n: usize,
    best: ExpertId,
    gap: f64,
    noise: Noise,
    rng: StreamRng,
}

impl PlantedAdversary {
    /// The planted expert is drawn uniformly from the adversary's stream.
    pub fn new(n: usize, gap: f64, noise: Noise, source: &RandomnessSource) -> Self {
        let mut rng = source.fork("planted").rng();
        let best = ExpertId::from_index(rng.gen_range(0..n.max(1)));
        PlantedAdversary {
            n,
            best,
            gap: gap.clamp(0.0, 1.0),
            noise,
            rng,
        }
    }

    pub fn best(&self) -> ExpertId {
        self.best
    }
}

impl Adversary for PlantedAdversary {
    fn experts(&self) -> usize {
        self.n
    }

    fn reveal(&mut self, _: Day, _: Option<&[f64]>, out: &mut [f64]) {
        let b = self.best.index();
        for (i, x) in out.iter_mut().enumerate() {
            let mean = if i == b {
                0.5 - self.gap / 2.0
            } else {
                0.5 + self.gap / 2.0
            };
            *x = self.noise.draw(mean, &mut self.rng);
        }
    }
}

/// Expert `A` is the good one up to the switch day, `B` after it.
#[derive(Debug, Clone)]
pub struct TwoPhaseAdversary {
    n: usize,
    first: ExpertId,
    second: ExpertId,
    switch: Day,
    gap: f64,
    noise: Noise,
    rng: StreamRng,
}

impl TwoPhaseAdversary {
    /// Days `1..=horizon/2` favor `A`, the rest `B`. `A != B` whenever
    /// `n >= 2`.
    pub fn new(n: usize, horizon: Day, gap: f64, noise: Noise, source: &RandomnessSource) -> Self {
        let mut rng = source.fork("two-phase").rng();
        let (first, second) = if n >= 2 {
            let pair = rand::seq::index::sample(&mut rng, n, 2);
            (pair.index(0), pair.index(1))
        } else {
            (0, 0)
        };
        TwoPhaseAdversary {
            n,
            first: ExpertId::from_index(first),
            second: ExpertId::from_index(second),
            switch: horizon / 2,
            gap: gap.clamp(0.0, 1.0),
            noise,
            rng,
        }
    }

    pub fn phases(&self) -> (ExpertId, ExpertId) {
        (self.first, self.second)
    }

    /// Last day of the first phase.
    pub fn switch_day(&self) -> Day {
        self.switch
    }
}

impl Adversary for TwoPhaseAdversary {
    fn experts(&self) -> usize {
        self.n
    }

    fn reveal(&mut self, day: Day, _: Option<&[f64]>, out: &mut [f64]) {
        let good = if day <= self.switch {
            self.first
        } else {
            self.second
        };
        for (i, x) in out.iter_mut().enumerate() {
            let mean = if i == good.index() {
                0.5 - self.gap / 2.0
            } else {
                0.5 + self.gap / 2.0
            };
            *x = self.noise.draw(mean, &mut self.rng);
        }
    }
}

/// Block size for `n` experts at target `eps`: the `M >= 4`, `M = 1 mod 3`,
/// `M | n` closest to `round(eps sqrt(n))` (the smaller one on ties).
pub fn block_size(n: usize, eps: f64) -> Result<usize, AdversaryError> {
    let target = libm::round(eps * libm::sqrt(n as f64)).max(0.0) as usize;
    (4..=n)
        .filter(|m| m % 3 == 1 && n.is_multiple_of(*m))
        .min_by_key(|&m| (m.abs_diff(target), m))
        .ok_or(AdversaryError::NoBlockSize { n, target })
}

/// `N = n / M` independent set-disjointness blocks laid out contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisjointnessInstance {
    block: usize,
    x_a: Vec<bool>,
    x_b: Vec<bool>,
    stars: Vec<ExpertId>,
}

impl DisjointnessInstance {
    /// Block size `M`.
    pub fn block_size(&self) -> usize {
        self.block
    }

    /// Number of blocks `N`.
    pub fn blocks(&self) -> usize {
        self.x_a.len() / self.block
    }

    pub fn experts(&self) -> usize {
        self.x_a.len()
    }

    pub fn x_a(&self) -> &[bool] {
        &self.x_a
    }

    pub fn x_b(&self) -> &[bool] {
        &self.x_b
    }

    /// The intersecting coordinate of every block.
    pub fn stars(&self) -> &[ExpertId] {
        &self.stars
    }

    pub fn block_of(&self, e: ExpertId) -> usize {
        e.index() / self.block
    }

    /// `M / sqrt(n)`, the accuracy the instance actually realizes.
    pub fn effective_epsilon(&self) -> f64 {
        self.block as f64 / libm::sqrt(self.experts() as f64)
    }
}

/// Draw an instance with block size [`block_size`]`(n, eps)`.
pub fn sample_disjointness(
    n: usize,
    eps: f64,
    rng: &mut StreamRng,
) -> Result<DisjointnessInstance, AdversaryError> {
    let m = block_size(n, eps)?;
    let third = (m - 1) / 3;
    // (x_A, x_B) per slot before shuffling: the star, then (0,0), (1,0), (0,1)
    let mut pattern: Vec<(bool, bool)> = Vec::with_capacity(m);
    pattern.push((true, true));
    pattern.extend(core::iter::repeat_n((false, false), third));
    pattern.extend(core::iter::repeat_n((true, false), third));
    pattern.extend(core::iter::repeat_n((false, true), third));
    let mut x_a = Vec::with_capacity(n);
    let mut x_b = Vec::with_capacity(n);
    let mut stars = Vec::with_capacity(n / m);
    let mut slots: Vec<usize> = (0..m).collect();
    for alpha in 0..n / m {
        slots.shuffle(rng);
        let mut block = vec![(false, false); m];
        for (k, &s) in slots.iter().enumerate() {
            block[s] = pattern[k];
        }
        stars.push(ExpertId::from_index(alpha * m + slots[0]));
        for (a, b) in block {
            x_a.push(a);
            x_b.push(b);
        }
    }
    Ok(DisjointnessInstance {
        block: m,
        x_a,
        x_b,
        stars,
    })
}

/// The adaptive lower-bound stream.
///
/// Days are grouped into epochs of `max(1, N/10)` days. On a day, with
/// probability `1 - eps^2` every loss is 0. Otherwise blocks the learner
/// has played in earlier this epoch get 1/2 everywhere, and the other blocks
/// get `1 - x_A` or `1 - x_B` (one fair coin for the whole day). `eps` is the
/// effective `M / sqrt(n)`.
#[derive(Debug, Clone)]
pub struct DisjointnessAdversary {
    instance: DisjointnessInstance,
    eps: f64,
    epoch_len: Day,
    played: Vec<bool>,
    rng: StreamRng,
}

impl DisjointnessAdversary {
    pub fn new(n: usize, eps: f64, source: &RandomnessSource) -> Result<Self, AdversaryError> {
        let instance =
            sample_disjointness(n, eps, &mut source.fork("disjointness/instance").rng())?;
        let eff = instance.effective_epsilon();
        if (eff - eps).abs() > 1e-12 {
            log::info!(
                "disjointness: n = {n}, requested eps = {eps}, block size {} gives eps = {eff:.4}",
                instance.block_size()
            );
        }
        Ok(Self::from_instance(instance, source))
    }

    pub fn from_instance(instance: DisjointnessInstance, source: &RandomnessSource) -> Self {
        let blocks = instance.blocks();
        DisjointnessAdversary {
            eps: instance.effective_epsilon(),
            epoch_len: (blocks as Day / 10).max(1),
            played: vec![false; blocks],
            instance,
            rng: source.fork("disjointness/days").rng(),
        }
    }

    pub fn instance(&self) -> &DisjointnessInstance {
        &self.instance
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn epoch_len(&self) -> Day {
        self.epoch_len
    }

    /// Blocks played earlier in the current epoch.
    pub fn played_blocks(&self) -> Vec<usize> {
        (0..self.played.len()).filter(|&a| self.played[a]).collect()
    }

    /// Fill `out` for a loss day, given the side coin.
    pub fn loss_day(&self, side_a: bool, out: &mut [f64]) {
        let x = if side_a {
            &self.instance.x_a
        } else {
            &self.instance.x_b
        };
        let m = self.instance.block;
        for (i, o) in out.iter_mut().enumerate() {
            *o = if self.played[i / m] {
                0.5
            } else if x[i] {
                0.0
            } else {
                1.0
            };
        }
    }
}

impl Adversary for DisjointnessAdversary {
    fn experts(&self) -> usize {
        self.instance.experts()
    }

    fn reveal(&mut self, day: Day, _: Option<&[f64]>, out: &mut [f64]) {
        if (day - 1).is_multiple_of(self.epoch_len) {
            self.played.iter_mut().for_each(|p| *p = false);
        }
        let loss_day = self.rng.gen::<f64>() < self.eps * self.eps;
        let side_a = self.rng.gen::<bool>();
        if loss_day {
            self.loss_day(side_a, out);
        } else {
            out.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    fn observe_action(&mut self, _: Day, action: Action) {
        if let Action::Play(e) = action {
            let a = self.instance.block_of(e);
            self.played[a] = true;
        }
    }
}

/// Losses against strategy `p`: 1 off the special set, 1 on the `2S`
/// heaviest special experts (lower id first on ties), 0 on the rest.
/// `special` must be sorted.
pub fn strong_loss(
    special: &[ExpertId],
    budget: usize,
    p: &[f64],
    out: &mut [f64],
) -> Result<(), AdversaryError> {
    let n = out.len();
    if p.len() != n {
        return Err(AdversaryError::StrategyWidth { got: p.len(), n });
    }
    let total: f64 = p.iter().sum();
    if p.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-6 {
        return Err(AdversaryError::NotADistribution { n });
    }
    out.iter_mut().for_each(|x| *x = 1.0);
    let mut order: Vec<ExpertId> = special.to_vec();
    order.sort_by(|a, b| p[b.index()].total_cmp(&p[a.index()]).then(a.cmp(b)));
    for e in order.into_iter().skip(2 * budget) {
        out[e.index()] = 0.0;
    }
    Ok(())
}

/// The strong adaptive adversary with a fixed special set of `10 S`
/// experts.
#[derive(Debug, Clone)]
pub struct StrongAdversary {
    n: usize,
    budget: usize,
    special: Vec<ExpertId>,
}

impl StrongAdversary {
    pub fn new(n: usize, budget: usize, source: &RandomnessSource) -> Result<Self, AdversaryError> {
        let k = 10 * budget;
        if k > n || budget == 0 {
            return Err(AdversaryError::BudgetTooLarge { special: k, n });
        }
        let mut rng = source.fork("strong").rng();
        let mut special: Vec<ExpertId> = rand::seq::index::sample(&mut rng, n, k)
            .into_iter()
            .map(ExpertId::from_index)
            .collect();
        special.sort_unstable();
        Ok(StrongAdversary { n, budget, special })
    }

    pub fn special(&self) -> &[ExpertId] {
        &self.special
    }
}

impl Adversary for StrongAdversary {
    fn experts(&self) -> usize {
        self.n
    }

    fn wants_strategy(&self) -> bool {
        true
    }

    fn reveal(&mut self, day: Day, strategy: Option<&[f64]>, out: &mut [f64]) {
        let uniform;
        let p = match strategy {
            Some(p) if p.iter().sum::<f64>() > 0.0 => p,
            _ => {
                // abstention: no mass anywhere, treat as uniform
                uniform = vec![1.0 / self.n as f64; self.n];
                &uniform
            }
        };
        if let Err(e) = strong_loss(&self.special, self.budget, p, out) {
            log::warn!("day {day}: {e}; using the uniform strategy");
            let u = vec![1.0 / self.n as f64; self.n];
            let _ = strong_loss(&self.special, self.budget, &u, out);
        }
    }
}
