//! Maximum pseudolikelihood: logistic regression of each dyad on its change
//! statistics, fitted by damped Newton-Raphson.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::graph::UndirectedGraph;
use super::stats::ChangeStatState;
use crate::error::{Error, Result};
use crate::numeric::{log1p_exp, logistic};

#[derive(Debug, Clone, PartialEq)]
pub struct MpleFit {
    pub theta: Vec<f64>,
    pub se: Vec<f64>,
    /// Inverse of the negative Hessian of the log pseudolikelihood.
    pub cov: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// MPLE of `(θ1, θ2)` for the edges + GWESP model.
pub fn mple(g: &UndirectedGraph, tau: f64) -> Result<MpleFit> {
    let state = ChangeStatState::new(g.clone(), tau);
    // identical covariate rows collapse into weighted rows
    let mut groups: BTreeMap<(u64, bool), f64> = BTreeMap::new();
    for i in 0..g.n() {
        for j in i + 1..g.n() {
            let ds2 = state.delta_gwesp(i, j);
            *groups.entry((ds2.to_bits(), g.has_edge(i, j))).or_default() += 1.0;
        }
    }
    let rows: Vec<(Vec<f64>, bool, f64)> =
        groups.into_iter().map(|((bits, y), w)| (vec![1.0, f64::from_bits(bits)], y, w)).collect();
    weighted_logistic(&rows)
}

/// Edges-only MPLE: `θ̂1 = logit(density)`.
pub fn mple_edges_only(g: &UndirectedGraph) -> Result<MpleFit> {
    let e = g.n_edges() as f64;
    let m = g.n_dyads() as f64;
    weighted_logistic(&[(vec![1.0], true, e), (vec![1.0], false, m - e)])
}

fn weighted_logistic(rows: &[(Vec<f64>, bool, f64)]) -> Result<MpleFit> {
    let rows: Vec<_> = rows.iter().filter(|r| r.2 > 0.0).collect();
    if rows.is_empty() || rows.iter().all(|r| r.1) || rows.iter().all(|r| !r.1) {
        return Err(Error::MpleDoesNotExist);
    }
    let p = rows[0].0.len();
    let loglik = |beta: &DVector<f64>| -> f64 {
        rows.iter()
            .map(|(x, y, w)| {
                let eta: f64 = x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
                w * (if *y { eta } else { 0.0 } - log1p_exp(eta))
            })
            .sum()
    };
    let grad_hess = |beta: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for (x, y, w) in &rows {
            let eta: f64 = x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let mu = logistic(eta);
            let r = w * (if *y { 1.0 } else { 0.0 } - mu);
            let v = w * mu * (1.0 - mu);
            for a in 0..p {
                g[a] += r * x[a];
                for b in 0..p {
                    h[(a, b)] += v * x[a] * x[b];
                }
            }
        }
        (g, h)
    };

    let mut beta = DVector::zeros(p);
    let mut ll = loglik(&beta);
    for it in 0..200 {
        let (g, h) = grad_hess(&beta);
        if g.norm() < 1e-8 {
            return finish(beta, h, it);
        }
        let chol = h.clone().cholesky().ok_or(Error::MpleDoesNotExist)?;
        let step = chol.solve(&g);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &beta + &step * t;
            let cll = loglik(&cand);
            if cll >= ll - 1e-12 * ll.abs() {
                beta = cand;
                ll = cll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || beta.iter().any(|b| !b.is_finite() || b.abs() > 1e3) {
            return Err(Error::MpleDoesNotExist);
        }
    }
    Err(Error::MpleDoesNotExist)
}

fn finish(beta: DVector<f64>, h: DMatrix<f64>, iterations: usize) -> Result<MpleFit> {
    let cov = h.try_inverse().ok_or(Error::MpleDoesNotExist)?;
    let p = beta.len();
    let se: Vec<f64> = (0..p).map(|a| cov[(a, a)].sqrt()).collect();
    if se.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::MpleDoesNotExist);
    }
    Ok(MpleFit {
        theta: beta.iter().copied().collect(),
        se,
        cov: (0..p).map(|a| (0..p).map(|b| cov[(a, b)]).collect()).collect(),
        iterations,
    })
}
