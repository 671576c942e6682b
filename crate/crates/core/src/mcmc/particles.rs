use std::collections::HashSet;

use super::kernels::{mh_step, DmhKernel, Kernel};
use super::proposal::ProposalState;
use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numeric::euclidean;
use crate::par::map_indexed;
use crate::prior::Prior;
use crate::rng::stream;
use crate::types::{BoxDomain, ParamVector};

/// Iterations after burn-in without collecting `d` particles that count as a stall.
pub const DMH_STALL_LIMIT: usize = 100_000;

/// Particles from a short DMH run: after `burnin` iterations, the first `d`
/// distinct accepted states.
#[allow(clippy::too_many_arguments)]
pub fn dmh_particles<M: Model>(
    model: &M,
    x_obs: &M::Data,
    prior: &dyn Prior,
    init: &[f64],
    mut proposal: ProposalState,
    d: usize,
    burnin: usize,
    inner_cycles: usize,
    seed: u64,
) -> Result<(Vec<ParamVector>, usize)> {
    if d == 0 || inner_cycles == 0 {
        return Err(Error::InvalidArgument("need d >= 1 and inner_cycles >= 1".into()));
    }
    if !prior.support().contains(init) {
        return Err(Error::InvalidArgument("initial state outside the prior box".into()));
    }
    let x_prep = model.prepare(x_obs);
    let mut k = DmhKernel { model, x_obs, x_prep: &x_prep, prior, inner_cycles, simulations: 0 };
    let mut rng = stream(seed, 0);
    let mut theta = init.to_vec();
    let mut value = k.value(&theta);
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut out = Vec::with_capacity(d);
    let limit = burnin + DMH_STALL_LIMIT;
    let mut iter = 0;
    while out.len() < d {
        if iter >= limit {
            return Err(Error::AcceptanceStall {
                found: out.len(),
                wanted: d,
                iterations: iter,
                partial: out.into_iter().map(ParamVector::into_inner).collect(),
            });
        }
        iter += 1;
        let (step, v) = mh_step(&mut k, &theta, value, prior.support(), &mut proposal, &mut rng);
        theta = step.theta;
        value = v;
        proposal.observe(&theta, iter);
        if iter > burnin && step.accepted && seen.insert(theta.iter().map(|t| t.to_bits()).collect()) {
            out.push(ParamVector::new(theta.clone())?);
        }
    }
    Ok((out, iter))
}

/// Options for [`abc_particles`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcOptions {
    /// Number of Latin-hypercube points over the wide domain (`D`).
    pub n_design: usize,
    /// Kept fraction of the closest simulations.
    pub quantile: f64,
    /// Number of particles returned (`d`).
    pub n_particles: usize,
    /// Sampler cycles per simulated dataset, from the model's initial state.
    pub cycles: usize,
    /// Scale each summary coordinate by its standard deviation over the simulations.
    pub standardize: bool,
    pub seed: u64,
    pub workers: usize,
}

/// Result of ABC particle selection.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcResult {
    pub particles: Vec<ParamVector>,
    /// Wide domain `D₁`.
    pub domain1: BoxDomain,
    /// Bounding box `D₂` of the kept design points.
    pub domain2: BoxDomain,
    pub kept: Vec<ParamVector>,
    pub tolerance: f64,
}

/// Particle selection by rejection ABC on summary statistics.
///
/// `D₁ = [θ̂ - 10 se, θ̂ + 10 se] ∩ prior box`; simulations whose summary
/// distance to the data is within the `quantile` empirical quantile are
/// kept; particles form a Latin hypercube over their bounding box.
pub fn abc_particles<M: Model>(
    model: &M,
    x_obs: &M::Data,
    prior_box: &BoxDomain,
    mple: &[f64],
    se: &[f64],
    opts: AbcOptions,
) -> Result<AbcResult> {
    let p = model.dim();
    if mple.len() != p || se.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: mple.len().min(se.len()) });
    }
    if opts.n_design < opts.n_particles || opts.n_particles == 0 {
        return Err(Error::InvalidArgument("need D >= d >= 1".into()));
    }
    if !(opts.quantile > 0.0 && opts.quantile <= 1.0) {
        return Err(Error::InvalidArgument(format!("quantile must be in (0, 1], got {}", opts.quantile)));
    }
    let s_obs = model
        .summary(x_obs)
        .ok_or_else(|| Error::InvalidArgument("model has no summary statistics".into()))?;
    let wide = BoxDomain::new(
        mple.iter().zip(se).map(|(m, s)| m - 10.0 * s).collect(),
        mple.iter().zip(se).map(|(m, s)| m + 10.0 * s).collect(),
    )?;
    let domain1 = wide
        .intersect(prior_box)
        .ok_or_else(|| Error::InvalidArgument("MPLE window does not meet the prior box".into()))?;

    let mut rng = stream(opts.seed, 0);
    let design = latin_hypercube(opts.n_design, &domain1, &mut rng)?;
    let sims: Vec<Vec<f64>> = map_indexed(design.len(), opts.workers, |i| {
        let mut r = stream(opts.seed, i as u64 + 1);
        let mut y = model.initial_state(&design[i], &mut r);
        model.simulate(&mut y, &design[i], opts.cycles, &mut r);
        model.summary(&y).expect("summary available")
    });

    let scale: Vec<f64> = if opts.standardize {
        (0..s_obs.len())
            .map(|k| {
                let col: Vec<f64> = sims.iter().map(|s| s[k]).collect();
                let sd = crate::numeric::variance(&col).sqrt();
                if sd > 0.0 { sd } else { 1.0 }
            })
            .collect()
    } else {
        vec![1.0; s_obs.len()]
    };
    let scaled = |s: &[f64]| -> Vec<f64> { s.iter().zip(&scale).map(|(v, c)| v / c).collect() };
    let obs = scaled(&s_obs);
    let dists: Vec<f64> = sims.iter().map(|s| euclidean(&scaled(s), &obs)).collect();

    let mut sorted = dists.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let rank = ((opts.quantile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let tolerance = sorted[rank - 1];
    let kept: Vec<ParamVector> =
        design.iter().zip(&dists).filter(|(_, &d)| d <= tolerance).map(|(t, _)| t.clone()).collect();
    if kept.len() < p + 3 {
        return Err(Error::ToleranceTooTight { kept: kept.len(), needed: p + 3 });
    }
    let lo: Vec<f64> = (0..p).map(|k| kept.iter().map(|t| t[k]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..p).map(|k| kept.iter().map(|t| t[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let domain2 = BoxDomain::new(lo, hi)?;
    let particles = latin_hypercube(opts.n_particles, &domain2, &mut rng)?;
    Ok(AbcResult { particles, domain1, domain2, kept, tolerance })
}
