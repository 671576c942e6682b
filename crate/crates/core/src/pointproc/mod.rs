//! Attraction-repulsion Markov point process on a rectangular window.
//!
//! Parameters are `θ = (λ, θ1, θ2, θ3)` with a fixed hard-core radius `R`.

mod birth_death;
mod interaction;
mod pattern;

pub use birth_death::{birth_death_step, log_h_pp, log_h_with, BirthDeath, NoInteraction, PairInteraction};
pub use interaction::{phi, solve_breakpoints, InteractionParams, DEFAULT_CAP, DEFAULT_HARD_CORE};
pub use pattern::{dist, PointPattern, Window};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::Rng;

/// The attraction-repulsion process as a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointProcess {
    pub window: Window,
    pub hard_core: f64,
}

/// Pairwise distances of a pattern, packed row-wise over `i < j`.
#[derive(Debug, Clone)]
pub struct PreparedPattern {
    n: usize,
    dists: Vec<f64>,
    min_dist: f64,
}

impl PreparedPattern {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl PointProcess {
    pub fn new(window: Window, hard_core: f64) -> Result<Self> {
        if !(hard_core >= 0.0 && hard_core.is_finite()) {
            return Err(Error::InvalidArgument(format!("hard-core radius must be >= 0, got {hard_core}")));
        }
        Ok(Self { window, hard_core })
    }

    pub fn params(&self, theta: &[f64]) -> Result<InteractionParams> {
        InteractionParams::from_theta(theta, self.hard_core)
    }
}

impl Model for PointProcess {
    type Data = PointPattern;
    type Prepared = PreparedPattern;

    fn dim(&self) -> usize {
        4
    }

    fn prepare(&self, x: &PointPattern) -> PreparedPattern {
        let pts = x.points();
        let n = pts.len();
        let mut dists = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                dists.push(dist(pts[i], pts[j]));
            }
        }
        let min_dist = dists.iter().copied().fold(f64::INFINITY, f64::min);
        PreparedPattern { n, dists, min_dist }
    }

    /// `-inf` for a hard-core violation or parameters without a valid
    /// interaction function.
    fn log_h_prepared(&self, x: &PreparedPattern, theta: &[f64]) -> f64 {
        if x.min_dist <= self.hard_core {
            return f64::NEG_INFINITY;
        }
        let Ok(p) = self.params(theta) else {
            return f64::NEG_INFINITY;
        };
        let n = x.n;
        let mut sums = vec![0.0; n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let l = p.log_phi(x.dists[k]);
                sums[i] += l;
                sums[j] += l;
                k += 1;
            }
        }
        n as f64 * p.lambda.ln() + sums.iter().map(|&s| s.min(DEFAULT_CAP)).sum::<f64>()
    }

    /// `round(λ|S|)` uniform points placed under the hard core.
    fn initial_state(&self, theta: &[f64], rng: &mut Rng) -> PointPattern {
        let n = (theta[0] * self.window.area()).round().max(0.0) as usize;
        PointPattern::binomial_hard_core(n, self.window, self.hard_core, rng)
    }

    fn simulate(&self, state: &mut PointPattern, theta: &[f64], cycles: usize, rng: &mut Rng) {
        let Ok(p) = self.params(theta) else {
            log::warn!("no valid interaction function at {theta:?}; state left unchanged");
            return;
        };
        let x = std::mem::replace(state, PointPattern::empty(self.window));
        let mut bd = BirthDeath::new(x, &p);
        bd.run_cycles(cycles, rng);
        *state = bd.into_pattern();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn prepared_matches_direct() {
        let m = PointProcess::new(Window::square(300.0).unwrap(), 5.0).unwrap();
        let theta = [4e-4, 1.2, 15.0, 0.3];
        let mut rng = stream(8, 0);
        let mut x = m.initial_state(&theta, &mut rng);
        assert_eq!(x.len(), 36);
        m.simulate(&mut x, &theta, 5, &mut rng);
        let p = m.params(&theta).unwrap();
        let a = m.log_h(&x, &theta);
        let b = log_h_pp(&x, &p);
        assert!((a - b).abs() < 1e-9 * b.abs());
        assert!(x.min_distance() > 5.0);
    }

    #[test]
    fn invalid_theta_is_impossible() {
        let m = PointProcess::new(Window::square(100.0).unwrap(), 5.0).unwrap();
        let x = PointPattern::new(vec![[10.0, 10.0], [30.0, 30.0]], m.window).unwrap();
        assert_eq!(m.log_h(&x, &[4e-4, 1.0, 15.0, 0.3]), f64::NEG_INFINITY);
    }
}
