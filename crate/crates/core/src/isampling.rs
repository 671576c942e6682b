//! Importance-sampling estimates of `log Z(θ)/Z(θ̃)` and of log-likelihoods
//! from a reference ensemble simulated at a single `θ̃`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::numeric::log_sum_exp;
use crate::par::map_indexed;
use crate::rng::stream;
use crate::types::ParamVector;

/// `N` draws from `h(·|θ̃)/Z(θ̃)` in prepared form, with `log h(x_l|θ̃)` cached.
pub struct ReferenceEnsemble<P> {
    pub theta_tilde: ParamVector,
    pub draws: Vec<P>,
    pub log_h_tilde: Vec<f64>,
    pub cycles: usize,
    pub seed: u64,
}

impl<P> ReferenceEnsemble<P> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Last states of `n` independent chains, each started from
/// [`Model::initial_state`] and run for `cycles` cycles at `θ̃`.
///
/// Chain `l` uses stream `l` of `seed`.
pub fn build_reference_ensemble<M: Model>(
    model: &M,
    theta_tilde: &ParamVector,
    n: usize,
    cycles: usize,
    seed: u64,
    workers: usize,
) -> Result<ReferenceEnsemble<M::Prepared>> {
    check_args(model, theta_tilde, n, cycles)?;
    let draws = map_indexed(n, workers, |l| {
        let mut rng = stream(seed, l as u64);
        let mut x = model.initial_state(theta_tilde, &mut rng);
        model.simulate(&mut x, theta_tilde, cycles, &mut rng);
        model.prepare(&x)
    });
    Ok(finish(model, theta_tilde, draws, cycles, seed))
}

/// `n` states of one chain at `θ̃`, `cycles` cycles apart after a burn-in of
/// `cycles`. Cheaper but correlated; kept for speed comparisons.
pub fn build_thinned_ensemble<M: Model>(
    model: &M,
    theta_tilde: &ParamVector,
    n: usize,
    cycles: usize,
    seed: u64,
) -> Result<ReferenceEnsemble<M::Prepared>> {
    check_args(model, theta_tilde, n, cycles)?;
    let mut rng = stream(seed, 0);
    let mut x = model.initial_state(theta_tilde, &mut rng);
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        model.simulate(&mut x, theta_tilde, cycles, &mut rng);
        draws.push(model.prepare(&x));
    }
    Ok(finish(model, theta_tilde, draws, cycles, seed))
}

fn check_args<M: Model>(model: &M, theta_tilde: &ParamVector, n: usize, cycles: usize) -> Result<()> {
    if n == 0 || cycles == 0 {
        return Err(Error::InvalidArgument("ensemble needs N >= 1 and cycles >= 1".into()));
    }
    if theta_tilde.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: theta_tilde.dim() });
    }
    Ok(())
}

fn finish<M: Model>(
    model: &M,
    theta_tilde: &ParamVector,
    draws: Vec<M::Prepared>,
    cycles: usize,
    seed: u64,
) -> ReferenceEnsemble<M::Prepared> {
    let log_h_tilde = draws.iter().map(|x| model.log_h_prepared(x, theta_tilde)).collect();
    ReferenceEnsemble { theta_tilde: theta_tilde.clone(), draws, log_h_tilde, cycles, seed }
}

/// A log-scale estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsEstimate {
    pub value: f64,
    pub se: f64,
    /// Every importance ratio was zero.
    pub degenerate: bool,
}

/// `log((1/N) Σ_l h(x_l|θ)/h(x_l|θ̃))`.
pub fn is_log_z<M: Model>(model: &M, theta: &[f64], ens: &ReferenceEnsemble<M::Prepared>) -> IsEstimate {
    let r: Vec<f64> = ens
        .draws
        .iter()
        .zip(&ens.log_h_tilde)
        .map(|(x, &lt)| model.log_h_prepared(x, theta) - lt)
        .collect();
    log_mean_exp_with_se(&r)
}

/// `log h(x_obs|θ) - log Ẑ(θ)`; `-inf` when `h(x_obs|θ) = 0`.
pub fn is_log_lik<M: Model>(
    model: &M,
    theta: &[f64],
    x_obs: &M::Prepared,
    ens: &ReferenceEnsemble<M::Prepared>,
) -> IsEstimate {
    let lh = model.log_h_prepared(x_obs, theta);
    if lh == f64::NEG_INFINITY {
        return IsEstimate { value: f64::NEG_INFINITY, se: 0.0, degenerate: false };
    }
    let z = is_log_z(model, theta, ens);
    IsEstimate { value: lh - z.value, ..z }
}

fn log_mean_exp_with_se(r: &[f64]) -> IsEstimate {
    let n = r.len() as f64;
    let lse = log_sum_exp(r).unwrap_or(f64::NEG_INFINITY);
    if lse == f64::NEG_INFINITY {
        log::warn!("all importance ratios are zero");
        return IsEstimate { value: f64::NEG_INFINITY, se: f64::INFINITY, degenerate: true };
    }
    let value = lse - n.ln();
    // normalised weights w_l / mean(w) have mean 1
    let var = if r.len() > 1 {
        r.iter().map(|&x| ((x - value).exp() - 1.0).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    IsEstimate { value, se: (var / n).sqrt(), degenerate: false }
}

/// Which quantity a particle table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    /// `log Ẑ_IS(θ)`, for normalising-function emulation.
    NormEm,
    /// `log L̂(θ)`, for likelihood emulation.
    LikEm,
}

impl TableKind {
    pub fn column(self) -> &'static str {
        match self {
            TableKind::NormEm => "log_z_is",
            TableKind::LikEm => "log_lik_is",
        }
    }
}

/// Pre-computed responses at the particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleTable {
    pub particles: Vec<ParamVector>,
    pub values: Vec<f64>,
    pub kind: TableKind,
    pub n_samples: usize,
    pub cycles: usize,
    pub theta_tilde: Option<ParamVector>,
    pub seed: u64,
}

impl ParticleTable {
    /// A table from externally computed values, e.g. direct log-likelihoods.
    pub fn from_values(particles: Vec<ParamVector>, values: Vec<f64>, kind: TableKind) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::EmptyInput);
        }
        if particles.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: particles.len(), got: values.len() });
        }
        let p = particles[0].dim();
        if let Some(bad) = particles.iter().find(|t| t.dim() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: bad.dim() });
        }
        let bad: Vec<usize> = values.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
        if !bad.is_empty() {
            return Err(Error::NonFiniteEstimates(bad));
        }
        Ok(Self { particles, values, kind, n_samples: 0, cycles: 0, theta_tilde: None, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.first().map_or(0, |t| t.dim())
    }
}

/// Builds the reference ensemble at `θ̃` and evaluates the IS estimate at
/// every particle. `x_obs` is required for [`TableKind::LikEm`].
#[allow(clippy::too_many_arguments)]
pub fn precompute_table<M: Model>(
    model: &M,
    particles: &[ParamVector],
    theta_tilde: &ParamVector,
    n_samples: usize,
    cycles: usize,
    kind: TableKind,
    x_obs: Option<&M::Data>,
    seed: u64,
    workers: usize,
) -> Result<ParticleTable> {
    if particles.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = particles.iter().find(|t| t.dim() != model.dim()) {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: bad.dim() });
    }
    let obs = match (kind, x_obs) {
        (TableKind::LikEm, Some(x)) => Some(model.prepare(x)),
        (TableKind::LikEm, None) => {
            return Err(Error::InvalidArgument("likelihood table needs observed data".into()))
        }
        (TableKind::NormEm, _) => None,
    };
    let ens = build_reference_ensemble(model, theta_tilde, n_samples, cycles, seed, workers)?;
    table_from_ensemble(model, particles, &ens, kind, obs.as_ref(), workers)
}

/// IS estimates at every particle from an existing ensemble, so that both
/// table kinds can share one set of draws. `x_obs` must be given (prepared)
/// for [`TableKind::LikEm`].
pub fn table_from_ensemble<M: Model>(
    model: &M,
    particles: &[ParamVector],
    ens: &ReferenceEnsemble<M::Prepared>,
    kind: TableKind,
    x_obs: Option<&M::Prepared>,
    workers: usize,
) -> Result<ParticleTable> {
    if particles.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = particles.iter().find(|t| t.dim() != model.dim()) {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: bad.dim() });
    }
    let obs = match (kind, x_obs) {
        (TableKind::LikEm, None) => {
            return Err(Error::InvalidArgument("likelihood table needs observed data".into()))
        }
        (TableKind::LikEm, x) => x,
        (TableKind::NormEm, _) => None,
    };
    let values = map_indexed(particles.len(), workers, |i| match obs {
        Some(x) => is_log_lik(model, &particles[i], x, ens).value,
        None => is_log_z(model, &particles[i], ens).value,
    });
    let bad: Vec<usize> = values.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
    if !bad.is_empty() {
        return Err(Error::NonFiniteEstimates(bad));
    }
    Ok(ParticleTable {
        particles: particles.to_vec(),
        values,
        kind,
        n_samples: ens.len(),
        cycles: ens.cycles,
        theta_tilde: Some(ens.theta_tilde.clone()),
        seed: ens.seed,
    })
}
