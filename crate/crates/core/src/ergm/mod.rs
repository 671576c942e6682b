//! Curved exponential random graph model with edges and GWESP terms,
//!
//! `h(x | θ) = exp{θ1 S1(x) + θ2 S2(x)}`, where `S1` is the edge count and
//! `S2` the geometrically weighted edgewise shared partner statistic with
//! fixed decay `τ` (default 0.25).

mod gibbs;
mod graph;
mod grid;
mod mple;
mod stats;

use std::collections::HashMap;

pub use gibbs::{gibbs_cycle, gibbs_cycles, GibbsSampler};
pub use graph::UndirectedGraph;
pub use grid::GridPosterior;
pub use mple::{mple, mple_edges_only, MpleFit};
pub use stats::{change_stats, esp_counts, gwesp_weight, stat_edges, stat_gwesp, ChangeStatState, ErgmStats};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::numeric::log_sum_exp;
use crate::rng::Rng;

pub const DEFAULT_TAU: f64 = 0.25;

/// The edges + GWESP ERGM on `n` nodes, as a [`Model`].
///
/// Importance-sampling draws are reduced to their sufficient statistics, so
/// `log h(x|θ) - log h(x|θ̃) = (θ - θ̃)·S(x)` costs two multiplications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ergm {
    pub n: usize,
    pub tau: f64,
}

impl Ergm {
    pub fn new(n: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("GWESP decay must be positive, got {tau}")));
        }
        Ok(Self { n, tau })
    }
}

impl Model for Ergm {
    type Data = UndirectedGraph;
    type Prepared = [f64; 2];

    fn dim(&self) -> usize {
        2
    }

    fn prepare(&self, data: &UndirectedGraph) -> [f64; 2] {
        ErgmStats::of(data, self.tau).as_array()
    }

    fn log_h_prepared(&self, s: &[f64; 2], theta: &[f64]) -> f64 {
        theta[0] * s[0] + theta[1] * s[1]
    }

    fn initial_state(&self, _theta: &[f64], _rng: &mut Rng) -> UndirectedGraph {
        UndirectedGraph::empty(self.n)
    }

    fn simulate(&self, state: &mut UndirectedGraph, theta: &[f64], cycles: usize, rng: &mut Rng) {
        let g = std::mem::replace(state, UndirectedGraph::empty(0));
        *state = gibbs_cycles(g, theta, self.tau, cycles, rng);
    }

    fn summary(&self, data: &UndirectedGraph) -> Option<Vec<f64>> {
        Some(self.prepare(data).to_vec())
    }
}

/// One class of graphs sharing the same sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StatClass {
    pub s1: f64,
    pub s2: f64,
    pub count: u64,
}

/// Enumerates all `2^{n(n-1)/2}` graphs on `n <= 6` nodes, grouped by
/// (edge count, shared-partner distribution).
pub fn exact_stat_table(n: usize, tau: f64) -> Result<Vec<StatClass>> {
    if n > 6 {
        return Err(Error::TooLargeForBruteForce);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut classes: HashMap<(usize, Vec<usize>), u64> = HashMap::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let mut g = UndirectedGraph::empty(n);
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if mask >> k & 1 == 1 {
                g.set(i, j, true);
            }
        }
        *classes.entry((g.n_edges(), esp_counts(&g))).or_default() += 1;
    }
    let mut out: Vec<StatClass> = classes
        .into_iter()
        .map(|((e, esp), count)| StatClass {
            s1: e as f64,
            s2: esp.iter().enumerate().map(|(k, &c)| gwesp_weight(k + 1, tau) * c as f64).sum(),
            count,
        })
        .collect();
    out.sort_by(|a, b| a.s1.total_cmp(&b.s1).then(a.s2.total_cmp(&b.s2)));
    Ok(out)
}

/// `log Z(θ)` by summing over every graph on `n <= 6` nodes.
pub fn exact_log_z_bruteforce(n: usize, theta: &[f64], tau: f64) -> Result<f64> {
    let table = exact_stat_table(n, tau)?;
    log_z_from_table(&table, theta)
}

/// `log Z(θ)` from a precomputed [`exact_stat_table`].
pub fn log_z_from_table(table: &[StatClass], theta: &[f64]) -> Result<f64> {
    let terms: Vec<f64> = table
        .iter()
        .map(|c| (c.count as f64).ln() + theta[0] * c.s1 + theta[1] * c.s2)
        .collect();
    log_sum_exp(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn tiny_partition_functions() {
        assert!((exact_log_z_bruteforce(2, &[0.0, 0.0], 0.25).unwrap() - 2f64.ln()).abs() < 1e-14);
        assert!((exact_log_z_bruteforce(3, &[0.0, 0.0], 0.25).unwrap() - 8f64.ln()).abs() < 1e-14);
        assert!(matches!(exact_log_z_bruteforce(7, &[0.0, 0.0], 0.25), Err(Error::TooLargeForBruteForce)));
        let total: u64 = exact_stat_table(4, 0.25).unwrap().iter().map(|c| c.count).sum();
        assert_eq!(total, 64);
    }

    #[test]
    fn edges_only_partition_function_is_binomial() {
        // θ2 = 0: Z = (1 + e^{θ1})^{m}
        let lz = exact_log_z_bruteforce(5, &[-0.7, 0.0], 0.25).unwrap();
        assert!((lz - 10.0 * (1.0 + (-0.7f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn gibbs_preserves_exact_distribution_on_four_nodes() {
        let theta = [-1.0, 0.5];
        let n = 4;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let lz = exact_log_z_bruteforce(n, &theta, DEFAULT_TAU).unwrap();
        let encode = |g: &UndirectedGraph| -> usize {
            pairs.iter().enumerate().filter(|(_, &(i, j))| g.has_edge(i, j)).map(|(k, _)| 1 << k).sum()
        };
        let exact: Vec<f64> = (0..64usize)
            .map(|mask| {
                let edges: Vec<_> = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e).collect();
                let g = UndirectedGraph::from_edges(n, &edges).unwrap();
                let s = ErgmStats::of(&g, DEFAULT_TAU);
                (theta[0] * s.s1 + theta[1] * s.s2 - lz).exp()
            })
            .collect();

        let cycles = 1_000_000;
        let batches = 1000;
        let per_batch = cycles / batches;
        let mut rng = stream(44, 0);
        let mut sampler = GibbsSampler::new(n);
        let mut state = ChangeStatState::new(UndirectedGraph::empty(n), DEFAULT_TAU);
        let mut batch_freq = vec![vec![0u32; 64]; batches];
        for b in 0..batches {
            for _ in 0..per_batch {
                sampler.run(&mut state, &theta, 1, &mut rng);
                batch_freq[b][encode(state.graph())] += 1;
            }
        }
        for s in 0..64 {
            let means: Vec<f64> = batch_freq.iter().map(|f| f[s] as f64 / per_batch as f64).collect();
            let m = crate::numeric::mean(&means);
            let se = (crate::numeric::variance(&means) / batches as f64).sqrt().max(1e-12);
            assert!((m - exact[s]).abs() < 3.0 * se + 1e-9, "state {s}: {m} vs {} (se {se})", exact[s]);
        }
    }
}
