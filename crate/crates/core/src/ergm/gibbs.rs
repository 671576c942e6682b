//! Random-scan Gibbs sampling for the edges + GWESP model.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::graph::UndirectedGraph;
use super::stats::ChangeStatState;
use crate::numeric::logistic;
use crate::rng::Rng;

/// Runs Gibbs cycles on a cached state. Each cycle visits every dyad once in
/// a fresh uniformly random order and redraws it from its full conditional
/// `P(x_ij = 1 | rest) = logistic(θ1 + θ2 Δs2)`.
pub struct GibbsSampler {
    dyads: Vec<(u32, u32)>,
}

impl GibbsSampler {
    pub fn new(n: usize) -> Self {
        let mut dyads = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                dyads.push((i as u32, j as u32));
            }
        }
        Self { dyads }
    }

    pub fn run(&mut self, state: &mut ChangeStatState, theta: &[f64], cycles: usize, rng: &mut Rng) {
        let (t1, t2) = (theta[0], theta[1]);
        for _ in 0..cycles {
            self.dyads.shuffle(rng);
            for &(i, j) in &self.dyads {
                let (i, j) = (i as usize, j as usize);
                let eta = t1 + t2 * state.delta_gwesp(i, j);
                let on = rng.random::<f64>() < logistic(eta);
                state.set(i, j, on);
            }
        }
    }
}

/// One Gibbs cycle starting from `g` at `θ = (θ1, θ2)`.
pub fn gibbs_cycle(g: &UndirectedGraph, theta: &[f64], tau: f64, rng: &mut Rng) -> UndirectedGraph {
    gibbs_cycles(g.clone(), theta, tau, 1, rng)
}

pub fn gibbs_cycles(g: UndirectedGraph, theta: &[f64], tau: f64, cycles: usize, rng: &mut Rng) -> UndirectedGraph {
    let mut sampler = GibbsSampler::new(g.n());
    let mut state = ChangeStatState::new(g, tau);
    sampler.run(&mut state, theta, cycles, rng);
    state.into_graph()
}
