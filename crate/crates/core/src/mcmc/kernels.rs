use rand::Rng as _;

use super::proposal::ProposalState;
use crate::gp::GpEmulator;
use crate::model::Model;
use crate::prior::Prior;
use crate::rng::Rng;

/// Outcome of one Metropolis-Hastings step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub theta: Vec<f64>,
    pub accepted: bool,
    /// Untruncated log acceptance ratio; `-inf` outside the prior support.
    pub log_alpha: f64,
}

/// A Metropolis-Hastings target seen through a cached per-state value.
///
/// `value` is the log target at a state when that is computable (emulated
/// samplers, or the observed-data part of DMH); `log_ratio` may use
/// randomness (DMH auxiliary draws). Proposals are symmetric, so `q` terms
/// cancel.
pub(crate) trait Kernel {
    fn value(&self, theta: &[f64]) -> f64;
    fn log_ratio(&mut self, cur: &[f64], cur_value: f64, prop: &[f64], prop_value: f64, rng: &mut Rng) -> f64;
}

/// `log p(θ) + log h(x|θ) - log Ẑ_GP(θ)`.
pub(crate) struct NormEmKernel<'a, M: Model> {
    pub model: &'a M,
    pub x_obs: &'a M::Prepared,
    pub emulator: &'a GpEmulator,
    pub prior: &'a dyn Prior,
}

impl<M: Model> Kernel for NormEmKernel<'_, M> {
    fn value(&self, theta: &[f64]) -> f64 {
        let lp = self.prior.log_density(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.model.log_h_prepared(self.x_obs, theta) - self.emulator.predict_mean(theta).unwrap_or(f64::NAN)
    }

    fn log_ratio(&mut self, _: &[f64], cur_value: f64, _: &[f64], prop_value: f64, _: &mut Rng) -> f64 {
        prop_value - cur_value
    }
}

/// `log p(θ) + log L̂_GP(θ)`.
pub(crate) struct LikEmKernel<'a> {
    pub emulator: &'a GpEmulator,
    pub prior: &'a dyn Prior,
}

impl Kernel for LikEmKernel<'_> {
    fn value(&self, theta: &[f64]) -> f64 {
        let lp = self.prior.log_density(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.emulator.predict_mean(theta).unwrap_or(f64::NAN)
    }

    fn log_ratio(&mut self, _: &[f64], cur_value: f64, _: &[f64], prop_value: f64, _: &mut Rng) -> f64 {
        prop_value - cur_value
    }
}

/// Double Metropolis-Hastings: `value` is `log p(θ) + log h(x|θ)`; the
/// ratio adds `log h(y|θ) - log h(y|θ′)` for `y` simulated at `θ′` from `x`.
pub(crate) struct DmhKernel<'a, M: Model> {
    pub model: &'a M,
    pub x_obs: &'a M::Data,
    pub x_prep: &'a M::Prepared,
    pub prior: &'a dyn Prior,
    pub inner_cycles: usize,
    pub simulations: usize,
}

impl<M: Model> Kernel for DmhKernel<'_, M> {
    fn value(&self, theta: &[f64]) -> f64 {
        let lp = self.prior.log_density(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.model.log_h_prepared(self.x_prep, theta)
    }

    fn log_ratio(&mut self, cur: &[f64], cur_value: f64, prop: &[f64], prop_value: f64, rng: &mut Rng) -> f64 {
        let mut y = self.x_obs.clone();
        self.model.simulate(&mut y, prop, self.inner_cycles, rng);
        self.simulations += 1;
        let yp = self.model.prepare(&y);
        prop_value - cur_value + self.model.log_h_prepared(&yp, cur) - self.model.log_h_prepared(&yp, prop)
    }
}

/// Generic step with the current value cached by the caller.
pub(crate) fn mh_step<K: Kernel>(
    kernel: &mut K,
    theta: &[f64],
    cur_value: f64,
    support: &crate::types::BoxDomain,
    proposal: &mut ProposalState,
    rng: &mut Rng,
) -> (StepResult, f64) {
    let prop = proposal.propose(theta, rng);
    if !support.contains(&prop) {
        return (StepResult { theta: theta.to_vec(), accepted: false, log_alpha: f64::NEG_INFINITY }, cur_value);
    }
    let prop_value = kernel.value(&prop);
    if prop_value == f64::NEG_INFINITY {
        return (StepResult { theta: theta.to_vec(), accepted: false, log_alpha: f64::NEG_INFINITY }, cur_value);
    }
    let log_alpha = kernel.log_ratio(theta, cur_value, &prop, prop_value, rng);
    let accept = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
    if accept {
        (StepResult { theta: prop, accepted: true, log_alpha }, prop_value)
    } else {
        (StepResult { theta: theta.to_vec(), accepted: false, log_alpha }, cur_value)
    }
}

/// One NormEm step from `θ_n`.
pub fn normem_step<M: Model>(
    theta: &[f64],
    emulator: &GpEmulator,
    model: &M,
    x_obs: &M::Prepared,
    prior: &dyn Prior,
    proposal: &mut ProposalState,
    rng: &mut Rng,
) -> StepResult {
    let mut k = NormEmKernel { model, x_obs, emulator, prior };
    let v = k.value(theta);
    mh_step(&mut k, theta, v, prior.support(), proposal, rng).0
}

/// One LikEm step from `θ_n`; `h(x|θ)` is never evaluated.
pub fn likem_step(
    theta: &[f64],
    emulator: &GpEmulator,
    prior: &dyn Prior,
    proposal: &mut ProposalState,
    rng: &mut Rng,
) -> StepResult {
    let mut k = LikEmKernel { emulator, prior };
    let v = k.value(theta);
    mh_step(&mut k, theta, v, prior.support(), proposal, rng).0
}

/// One DMH step from `θ_n`; the auxiliary chain starts at `x_obs`.
#[allow(clippy::too_many_arguments)]
pub fn dmh_step<M: Model>(
    theta: &[f64],
    model: &M,
    x_obs: &M::Data,
    prior: &dyn Prior,
    proposal: &mut ProposalState,
    inner_cycles: usize,
    rng: &mut Rng,
) -> StepResult {
    let x_prep = model.prepare(x_obs);
    let mut k = DmhKernel { model, x_obs, x_prep: &x_prep, prior, inner_cycles, simulations: 0 };
    let v = k.value(theta);
    mh_step(&mut k, theta, v, prior.support(), proposal, rng).0
}

/// Untruncated NormEm log acceptance ratio for `θ → θ′`.
pub fn normem_log_ratio<M: Model>(
    cur: &[f64],
    prop: &[f64],
    emulator: &GpEmulator,
    model: &M,
    x_obs: &M::Prepared,
    prior: &dyn Prior,
) -> f64 {
    let k = NormEmKernel { model, x_obs, emulator, prior };
    k.value(prop) - k.value(cur)
}

/// Untruncated LikEm log acceptance ratio for `θ → θ′`.
pub fn likem_log_ratio(cur: &[f64], prop: &[f64], emulator: &GpEmulator, prior: &dyn Prior) -> f64 {
    let k = LikEmKernel { emulator, prior };
    k.value(prop) - k.value(cur)
}

/// Untruncated DMH log acceptance ratio for `θ → θ′` given the auxiliary
/// draw `y` (prepared).
pub fn dmh_log_ratio<M: Model>(
    cur: &[f64],
    prop: &[f64],
    model: &M,
    x_obs: &M::Prepared,
    y: &M::Prepared,
    prior: &dyn Prior,
) -> f64 {
    let v = |t: &[f64]| prior.log_density(t) + model.log_h_prepared(x_obs, t);
    v(prop) - v(cur) + model.log_h_prepared(y, cur) - model.log_h_prepared(y, prop)
}
