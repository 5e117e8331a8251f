//! Squint weighting.
//!
//! A meta-expert with accumulated excess `S = Σ v` and squared excess
//! `V = Σ v²` gets weight `E_η[η exp(η S − η² V)]` under the prior
//! `γ(η) ∝ 1/(η ln² η)` on `(0, 1/2]`. The expectation is evaluated on a
//! fixed quadrature grid ([`SquintGrid`]) in log-space, so large excesses do
//! not overflow.

use alloc::vec::Vec;

use thiserror::Error;

use crate::math::log_sum_exp;

pub const DEFAULT_GRID_POINTS: usize = 41;

/// Smallest learning rate on the grid; prior mass below it is lumped onto it.
const ETA_MIN_LOG2: i32 = -16;
const ETA_MAX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("squint grid needs an odd number of points >= 3, got {0}")]
    BadResolution(usize),
}

/// Quadrature nodes `η_j` and prior masses `γ_j` (summing to one).
///
/// Nodes are equally spaced in `ln η` between `2^-16` and `1/2`; masses are
/// composite Simpson weights for the prior density in `ln η`, with the prior
/// mass of `(0, 2^-16)` folded into the smallest node.
#[derive(Debug, Clone, PartialEq)]
pub struct SquintGrid {
    etas: Vec<f64>,
    masses: Vec<f64>,
    // ln(γ_j η_j), the constant part of each log-term.
    log_mass_eta: Vec<f64>,
}

impl SquintGrid {
    pub fn new(points: usize) -> Result<Self, GridError> {
        if points < 3 || points.is_multiple_of(2) {
            return Err(GridError::BadResolution(points));
        }
        let lo = ETA_MIN_LOG2 as f64 * core::f64::consts::LN_2;
        let hi = libm::log(ETA_MAX);
        let h = (hi - lo) / (points - 1) as f64;
        let mut etas = Vec::with_capacity(points);
        let mut masses = Vec::with_capacity(points);
        for k in 0..points {
            let u = lo + h * k as f64;
            let simpson = if k == 0 || k == points - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            // density of the normalised prior in u = ln η: ln 2 / u²
            let density = core::f64::consts::LN_2 / (u * u);
            etas.push(libm::exp(u));
            masses.push(simpson * h / 3.0 * density);
        }
        let covered: f64 = masses.iter().sum();
        if covered <= 1.0 {
            masses[0] += 1.0 - covered;
        } else {
            masses.iter_mut().for_each(|m| *m /= covered);
        }
        let log_mass_eta = etas
            .iter()
            .zip(&masses)
            .map(|(e, m)| libm::log(*e) + libm::log(*m))
            .collect();
        Ok(SquintGrid {
            etas,
            masses,
            log_mass_eta,
        })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// `ln` of the Squint weight for accumulated `(S, V)`.
    pub fn log_weight(&self, stats: &SquintStats) -> f64 {
        let (s, v) = (stats.sum_v, stats.sum_v2);
        log_sum_exp(
            self.etas
                .iter()
                .zip(&self.log_mass_eta)
                .map(move |(&eta, &c)| c + eta * s - eta * eta * v),
        )
    }

    pub fn weight(&self, stats: &SquintStats) -> f64 {
        libm::exp(self.log_weight(stats))
    }

    /// Weight of a meta-expert with no history, `E_γ[η]`.
    pub fn fresh_weight(&self) -> f64 {
        self.etas.iter().zip(&self.masses).map(|(e, m)| e * m).sum()
    }
}

impl Default for SquintGrid {
    fn default() -> Self {
        SquintGrid::new(DEFAULT_GRID_POINTS).expect("default resolution is valid")
    }
}

/// Accumulated excess `Σ v` and squared excess `Σ v²` of one meta-expert.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SquintStats {
    pub sum_v: f64,
    pub sum_v2: f64,
}

impl SquintStats {
    pub fn push(&mut self, v: f64) {
        self.sum_v += v;
        self.sum_v2 += v * v;
    }

    pub const WORDS: usize = 2;
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Continuous-prior expectation by a 10^5-point midpoint rule in u = ln η,
    /// independent of the grid above.
    fn quadrature_oracle(s: f64, v: f64) -> f64 {
        let lo = -60.0f64;
        let hi = libm::log(0.5);
        let n = 100_000;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let u = lo + (k as f64 + 0.5) * h;
            let eta = libm::exp(u);
            let prior_u = core::f64::consts::LN_2 / (u * u);
            acc += prior_u * eta * libm::exp(eta * s - eta * eta * v) * h;
        }
        acc
    }

    #[test]
    fn masses_sum_to_one() {
        for pts in [3, 11, 41, 81] {
            let g = SquintGrid::new(pts).unwrap();
            let total: f64 = g.masses().iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "{pts}: {total}");
            assert!(g.masses().iter().all(|&m| m > 0.0));
        }
        assert!(SquintGrid::new(40).is_err());
        assert!(SquintGrid::new(1).is_err());
    }

    #[test]
    fn empty_history_is_prior_mean() {
        let g = SquintGrid::default();
        let w = g.weight(&SquintStats::default());
        assert!((w - g.fresh_weight()).abs() < 1e-12);
        // and matches the continuous E_γ[η] = 0.2375... within 1%
        let exact = quadrature_oracle(0.0, 0.0);
        assert!((w / exact - 1.0).abs() < 0.01, "{w} vs {exact}");
    }

    #[test]
    fn matches_high_resolution_quadrature() {
        let g = SquintGrid::default();
        for (s, v) in [
            (10.0, 10.0),
            (3.0, 50.0),
            (-5.0, 30.0),
            (50.0, 500.0),
            (1.0, 1.0),
        ] {
            let w = g.weight(&SquintStats {
                sum_v: s,
                sum_v2: v,
            });
            let exact = quadrature_oracle(s, v);
            assert!((w / exact - 1.0).abs() < 0.01, "({s},{v}): {w} vs {exact}");
        }
    }

    #[test]
    fn negative_excess_is_penalised() {
        let g = SquintGrid::default();
        let w = g.weight(&SquintStats {
            sum_v: -100.0,
            sum_v2: 100.0,
        });
        assert!(w < g.fresh_weight());
    }

    #[test]
    fn monotone_in_both_arguments() {
        let g = SquintGrid::default();
        for v2 in [0.5, 4.0, 40.0, 400.0] {
            let mut prev = f64::NEG_INFINITY;
            for k in -20..=20 {
                let s = k as f64;
                let lw = g.log_weight(&SquintStats {
                    sum_v: s,
                    sum_v2: v2,
                });
                assert!(lw > prev);
                prev = lw;
            }
        }
        for s in [-10.0, 0.0, 5.0, 30.0] {
            let mut prev = f64::INFINITY;
            for k in 0..=30 {
                let v2 = k as f64 * 3.0;
                let lw = g.log_weight(&SquintStats {
                    sum_v: s,
                    sum_v2: v2,
                });
                assert!(lw < prev);
                prev = lw;
            }
        }
    }

    #[test]
    fn no_overflow_for_large_excess() {
        let g = SquintGrid::default();
        let lw = g.log_weight(&SquintStats {
            sum_v: 1e5,
            sum_v2: 1e5,
        });
        assert!(lw.is_finite());
    }

    #[test]
    fn variance_invariant_holds_on_push() {
        let mut s = SquintStats::default();
        let vs = [0.3, -0.2, 0.9, 0.0, -1.0];
        for v in vs {
            s.push(v);
        }
        assert!(s.sum_v2 >= 0.0);
        assert!(s.sum_v2 >= s.sum_v * s.sum_v / vs.len() as f64 - 1e-12);
    }
}
