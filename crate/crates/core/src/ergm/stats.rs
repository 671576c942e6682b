//! Edge and GWESP statistics, change statistics and the incremental state
//! used by the Gibbs sampler.

use serde::{Deserialize, Serialize};

use super::graph::UndirectedGraph;
use crate::error::{Error, Result};

/// Sufficient statistics of the edges + GWESP model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgmStats {
    /// Edge count.
    pub s1: f64,
    /// GWESP value.
    pub s2: f64,
    pub tau: f64,
}

impl ErgmStats {
    pub fn of(g: &UndirectedGraph, tau: f64) -> Self {
        Self { s1: stat_edges(g) as f64, s2: stat_gwesp(g, tau), tau }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.s1, self.s2]
    }
}

/// Number of edges, each unordered pair counted once.
pub fn stat_edges(g: &UndirectedGraph) -> usize {
    g.n_edges()
}

/// Edgewise shared-partner distribution: entry `k - 1` counts the edges
/// whose endpoints have exactly `k` common neighbours, `k = 1..=n-2`.
pub fn esp_counts(g: &UndirectedGraph) -> Vec<usize> {
    let n = g.n();
    let mut esp = vec![0; n.saturating_sub(2)];
    if n < 3 {
        return esp;
    }
    for (i, j) in g.edges() {
        let k = g.common_neighbors(i, j);
        if k > 0 {
            esp[k - 1] += 1;
        }
    }
    esp
}

/// Weight of an edge with `k` shared partners: `e^τ (1 - (1 - e^{-τ})^k)`.
#[inline]
pub fn gwesp_weight(k: usize, tau: f64) -> f64 {
    tau.exp() * (1.0 - (1.0 - (-tau).exp()).powi(k as i32))
}

/// GWESP statistic `e^τ Σ_k (1 - (1 - e^{-τ})^k) ESP_k`.
pub fn stat_gwesp(g: &UndirectedGraph, tau: f64) -> f64 {
    esp_counts(g)
        .iter()
        .enumerate()
        .map(|(k, &c)| gwesp_weight(k + 1, tau) * c as f64)
        .sum()
}

/// Statistics with dyad `{i, j}` on minus with it off, all other dyads fixed.
///
/// Uses O(n) common-neighbour scans; the Gibbs sampler uses the cached
/// [`ChangeStatState`] instead.
pub fn change_stats(g: &UndirectedGraph, i: usize, j: usize, tau: f64) -> Result<(f64, f64)> {
    if i == j || i >= g.n() || j >= g.n() {
        return Err(Error::InvalidArgument(format!("change statistics need distinct nodes, got ({i}, {j})")));
    }
    let r = 1.0 - (-tau).exp();
    let present = g.has_edge(i, j) as usize;
    let mut ds2 = gwesp_weight(g.common_neighbors(i, j), tau);
    for w in 0..g.n() {
        if w != i && w != j && g.has_edge(i, w) && g.has_edge(j, w) {
            // shared-partner counts of (i,w) and (j,w) with {i,j} switched off
            let k_iw = g.common_neighbors(i, w) - present;
            let k_jw = g.common_neighbors(j, w) - present;
            ds2 += r.powi(k_iw as i32) + r.powi(k_jw as i32);
        }
    }
    Ok((1.0, ds2))
}

/// A graph plus a packed table of common-neighbour counts for every dyad,
/// kept current under toggles so change statistics cost one O(n) scan.
#[derive(Debug, Clone)]
pub struct ChangeStatState {
    graph: UndirectedGraph,
    common: Vec<u32>,
    rpow: Vec<f64>,
    weight: Vec<f64>,
}

impl ChangeStatState {
    pub fn new(graph: UndirectedGraph, tau: f64) -> Self {
        let n = graph.n();
        let mut common = vec![0u32; graph.n_dyads()];
        let mut nbrs = Vec::with_capacity(n);
        for w in 0..n {
            nbrs.clear();
            nbrs.extend(graph.neighbors(w));
            for (a_pos, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[a_pos + 1..] {
                    common[graph.dyad_index(a, b)] += 1;
                }
            }
        }
        let r = 1.0 - (-tau).exp();
        let rpow: Vec<f64> = (0..=n).map(|k| r.powi(k as i32)).collect();
        let weight: Vec<f64> = (0..=n).map(|k| gwesp_weight(k, tau)).collect();
        Self { graph, common, rpow, weight }
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn into_graph(self) -> UndirectedGraph {
        self.graph
    }

    #[inline]
    pub fn common(&self, i: usize, j: usize) -> usize {
        self.common[self.graph.dyad_index(i, j)] as usize
    }

    /// GWESP change statistic for dyad `{i, j}`; the edge change statistic is always 1.
    #[inline]
    pub fn delta_gwesp(&self, i: usize, j: usize) -> f64 {
        let g = &self.graph;
        let present = g.has_edge(i, j) as usize;
        let mut ds2 = self.weight[self.common(i, j)];
        for w in 0..g.n() {
            if w != i && w != j && g.has_edge(i, w) && g.has_edge(j, w) {
                ds2 += self.rpow[self.common(i, w) - present] + self.rpow[self.common(j, w) - present];
            }
        }
        ds2
    }

    /// Sets dyad `{i, j}` and updates the common-neighbour table.
    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        if !self.graph.set(i, j, on) {
            return;
        }
        let n = self.graph.n();
        for w in 0..n {
            if w == i || w == j {
                continue;
            }
            // j becomes (or stops being) a shared partner of i and every neighbour of j
            if self.graph.has_edge(j, w) {
                let k = self.graph.dyad_index(i, w);
                if on { self.common[k] += 1 } else { self.common[k] -= 1 }
            }
            if self.graph.has_edge(i, w) {
                let k = self.graph.dyad_index(j, w);
                if on { self.common[k] += 1 } else { self.common[k] -= 1 }
            }
        }
    }
}
