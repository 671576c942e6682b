//! Exact posterior on a regular grid for networks small enough to enumerate.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;

use super::{exact_stat_table, log_z_from_table, ErgmStats, UndirectedGraph};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::rng::Rng;
use crate::types::BoxDomain;

/// Posterior under a uniform prior on `domain`, evaluated at the midpoints of
/// an `m × m` partition of the box and treated as constant on each cell.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    domain: BoxDomain,
    m: usize,
    /// Cell probabilities, index `i * m + j` for cell `i` on axis 0 and `j` on axis 1.
    prob: Vec<f64>,
}

impl GridPosterior {
    pub fn new(x: &UndirectedGraph, tau: f64, domain: &BoxDomain, m: usize) -> Result<Self> {
        if domain.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: domain.dim() });
        }
        if m == 0 {
            return Err(Error::InvalidArgument("grid needs at least one cell per axis".into()));
        }
        let table = exact_stat_table(x.n(), tau)?;
        let s = ErgmStats::of(x, tau);
        let mut logp = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let t = [Self::mid(domain, 0, m, i), Self::mid(domain, 1, m, j)];
                logp.push(t[0] * s.s1 + t[1] * s.s2 - log_z_from_table(&table, &t)?);
            }
        }
        let lse = log_sum_exp(&logp)?;
        let prob = logp.iter().map(|l| (l - lse).exp()).collect();
        Ok(Self { domain: domain.clone(), m, prob })
    }

    fn mid(domain: &BoxDomain, axis: usize, m: usize, k: usize) -> f64 {
        domain.lower()[axis] + (k as f64 + 0.5) * domain.width(axis) / m as f64
    }

    /// Cell midpoints along `axis`.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        (0..self.m).map(|k| Self::mid(&self.domain, axis, self.m, k)).collect()
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.prob[i * self.m + j]
    }

    /// Marginal cell probabilities along `axis`.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for i in 0..self.m {
            for j in 0..self.m {
                out[if axis == 0 { i } else { j }] += self.prob(i, j);
            }
        }
        out
    }

    pub fn mean(&self, axis: usize) -> f64 {
        self.axis(axis).iter().zip(self.marginal(axis)).map(|(t, p)| t * p).sum()
    }

    /// Independent draws: a cell by its probability, then a uniform point in it.
    pub fn sample(&self, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        let cells = WeightedIndex::new(&self.prob).expect("normalised cell probabilities");
        let h: Vec<f64> = (0..2).map(|a| self.domain.width(a) / self.m as f64).collect();
        (0..k)
            .map(|_| {
                let c = cells.sample(rng);
                let (i, j) = (c / self.m, c % self.m);
                vec![
                    self.domain.lower()[0] + (i as f64 + rng.random::<f64>()) * h[0],
                    self.domain.lower()[1] + (j as f64 + rng.random::<f64>()) * h[1],
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn empty_graph_favours_small_theta1() {
        // S(x) = 0, so the posterior is proportional to 1/Z(θ)
        let x = UndirectedGraph::empty(4);
        let dom = BoxDomain::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap();
        let g = GridPosterior::new(&x, 0.25, &dom, 21).unwrap();
        let total: f64 = g.marginal(0).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let m0 = g.marginal(0);
        assert!(m0.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn draws_follow_the_cells() {
        let x = UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let dom = BoxDomain::new(vec![-3.0, -1.0], vec![1.0, 2.0]).unwrap();
        let g = GridPosterior::new(&x, 0.25, &dom, 11).unwrap();
        let draws = g.sample(40_000, &mut stream(1, 0));
        assert!(draws.iter().all(|d| dom.contains(d)));
        for axis in 0..2 {
            let m = draws.iter().map(|d| d[axis]).sum::<f64>() / draws.len() as f64;
            assert!((m - g.mean(axis)).abs() < 0.03, "axis {axis}: {m} vs {}", g.mean(axis));
        }
    }
}
