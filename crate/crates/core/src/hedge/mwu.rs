//! Exponential weights over a fixed, finite arm set.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::math::pick_by_quantile_with;

/// Learning rate `sqrt(ln(k/delta) / horizon)` with `delta = 1/(k horizon)`.
pub fn default_eta(arms: usize, horizon: u64) -> f64 {
    let k = arms.max(2) as f64;
    let h = horizon.max(1) as f64;
    libm::sqrt(libm::log(k * k * h) / h)
}

/// Cumulative losses of `k` arms and a fixed learning rate.
///
/// Arm probabilities are `p(i) ∝ exp(-eta (L_i - min L))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MwuState {
    cum_loss: Vec<f64>,
    eta: f64,
}

impl MwuState {
    pub fn new(arms: usize, eta: f64) -> Self {
        debug_assert!(eta >= 0.0 && eta.is_finite());
        MwuState {
            cum_loss: vec![0.0; arms],
            eta,
        }
    }

    pub fn with_horizon(arms: usize, horizon: u64) -> Self {
        Self::new(arms, default_eta(arms, horizon))
    }

    pub fn len(&self) -> usize {
        self.cum_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum_loss.is_empty()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cum_loss(&self) -> &[f64] {
        &self.cum_loss
    }

    /// Forget all history (uniform weights again).
    pub fn reset(&mut self) {
        self.cum_loss.iter_mut().for_each(|c| *c = 0.0);
    }

    fn min_loss(&self) -> f64 {
        self.cum_loss.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    fn weight(&self, i: usize, min: f64) -> f64 {
        libm::exp(-self.eta * (self.cum_loss[i] - min))
    }

    /// The current distribution; `None` for an empty arm set.
    pub fn distribution(&self) -> Option<Vec<f64>> {
        if self.cum_loss.is_empty() {
            return None;
        }
        let min = self.min_loss();
        let w: Vec<f64> = (0..self.len()).map(|i| self.weight(i, min)).collect();
        let total: f64 = w.iter().sum();
        Some(w.into_iter().map(|x| x / total).collect())
    }

    /// Arm at quantile `u ∈ [0, 1)`; `u = 0` gives the lowest-loss arm
    /// (lowest index on ties).
    pub fn sample_at(&self, u: f64) -> Option<usize> {
        let min = self.min_loss();
        pick_by_quantile_with(self.len(), |i| self.weight(i, min), u)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.cum_loss.is_empty() {
            return None;
        }
        if self.cum_loss.len() == 1 {
            return Some(0);
        }
        let u: f64 = rng.gen();
        self.sample_at(u)
    }

    /// Add one day of losses, `loss(i)` for every arm.
    pub fn update(&mut self, mut loss: impl FnMut(usize) -> f64) {
        for (i, c) in self.cum_loss.iter_mut().enumerate() {
            *c += loss(i);
        }
    }

    pub fn update_from(&mut self, losses: &[f64]) {
        debug_assert_eq!(losses.len(), self.cum_loss.len());
        for (c, l) in self.cum_loss.iter_mut().zip(losses) {
            *c += l;
        }
    }

    /// Stored scalars: one accumulator per arm plus the rate.
    pub fn words(&self) -> usize {
        self.cum_loss.len() + 1
    }
}
