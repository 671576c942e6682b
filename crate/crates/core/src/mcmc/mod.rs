//! Samplers: emulated Metropolis-Hastings on the normalising function
//! (NormEm) or on the likelihood (LikEm), double Metropolis-Hastings, and
//! particle selection.

mod kernels;
mod particles;
mod proposal;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use kernels::{
    dmh_log_ratio, dmh_step, likem_log_ratio, likem_step, normem_log_ratio, normem_step, StepResult,
};
pub use particles::{abc_particles, dmh_particles, AbcOptions, AbcResult, DMH_STALL_LIMIT};
pub use proposal::{adapt_proposal, ProposalState, DEFAULT_ADAPT_UNTIL, DEFAULT_MIN_HISTORY};

use kernels::{mh_step, DmhKernel, Kernel, LikEmKernel, NormEmKernel};

use crate::diagnostics::mcse_batch_means;
use crate::error::{Error, Result};
use crate::gp::GpEmulator;
use crate::model::Model;
use crate::prior::Prior;
use crate::rng::{stream, Rng};
use crate::types::ChainOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    NormEm,
    LikEm,
    Dmh,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::NormEm => "normem",
            Mode::LikEm => "likem",
            Mode::Dmh => "dmh",
        })
    }
}

/// When to stop a chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StopRule {
    /// Exactly `n_iter` iterations.
    Fixed,
    /// Stop once every batch-means MCSE is at most `threshold`, checked every
    /// `check_every` iterations from `min_iter` on; `n_iter` caps the run.
    Mcse { threshold: f64, min_iter: usize, check_every: usize },
}

impl StopRule {
    pub fn mcse(threshold: f64) -> Self {
        StopRule::Mcse { threshold, min_iter: 10_000, check_every: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_iter: usize,
    pub mode: Mode,
    /// Auxiliary sampler cycles per DMH iteration.
    pub inner_cycles: usize,
    pub stop: StopRule,
    pub seed: u64,
    /// Record the wall time of every iteration.
    pub record_timing: bool,
}

impl RunConfig {
    pub fn new(mode: Mode, n_iter: usize, seed: u64) -> Self {
        Self { n_iter, mode, inner_cycles: 1, stop: StopRule::Fixed, seed, record_timing: false }
    }
}

/// What a chain needs besides the prior and proposal.
pub enum Components<'a, M: Model> {
    NormEm { model: &'a M, x_obs: &'a M::Data, emulator: &'a GpEmulator },
    LikEm { emulator: &'a GpEmulator },
    Dmh { model: &'a M, x_obs: &'a M::Data },
}

impl<M: Model> Components<'_, M> {
    pub fn mode(&self) -> Mode {
        match self {
            Components::NormEm { .. } => Mode::NormEm,
            Components::LikEm { .. } => Mode::LikEm,
            Components::Dmh { .. } => Mode::Dmh,
        }
    }
}

/// Runs one chain from `init`.
pub fn run_chain<M: Model>(
    config: &RunConfig,
    components: Components<'_, M>,
    prior: &dyn Prior,
    init: &[f64],
    proposal: ProposalState,
) -> Result<ChainOutput> {
    if config.n_iter == 0 {
        return Err(Error::EmptyInput);
    }
    if components.mode() != config.mode {
        return Err(Error::InvalidArgument(format!(
            "mode {} does not match the supplied components ({})",
            config.mode,
            components.mode()
        )));
    }
    let p = prior.support().dim();
    if init.len() != p || proposal.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: init.len() });
    }
    if !prior.support().contains(init) {
        return Err(Error::InvalidArgument("initial state outside the prior box".into()));
    }
    match components {
        Components::NormEm { model, x_obs, emulator } => {
            check_emulator(emulator, p)?;
            let x = model.prepare(x_obs);
            let mut k = NormEmKernel { model, x_obs: &x, emulator, prior };
            drive(config, &mut k, prior, init, proposal)
        }
        Components::LikEm { emulator } => {
            check_emulator(emulator, p)?;
            let mut k = LikEmKernel { emulator, prior };
            drive(config, &mut k, prior, init, proposal)
        }
        Components::Dmh { model, x_obs } => {
            if config.inner_cycles == 0 {
                return Err(Error::InvalidArgument("inner_cycles must be >= 1".into()));
            }
            let x = model.prepare(x_obs);
            let mut k = DmhKernel { model, x_obs, x_prep: &x, prior, inner_cycles: config.inner_cycles, simulations: 0 };
            drive(config, &mut k, prior, init, proposal)
        }
    }
}

fn check_emulator(em: &GpEmulator, p: usize) -> Result<()> {
    if em.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: em.dim() });
    }
    Ok(())
}

fn drive<K: Kernel>(
    config: &RunConfig,
    kernel: &mut K,
    prior: &dyn Prior,
    init: &[f64],
    mut proposal: ProposalState,
) -> Result<ChainOutput> {
    let mut rng: Rng = stream(config.seed, 0);
    let start = Instant::now();
    let mut theta = init.to_vec();
    let mut value = kernel.value(&theta);
    if !value.is_finite() {
        return Err(Error::InvalidArgument("log target is not finite at the initial state".into()));
    }
    let mut samples = Vec::with_capacity(config.n_iter);
    let mut times = config.record_timing.then(|| Vec::with_capacity(config.n_iter));
    let mut acc = 0;
    for iter in 1..=config.n_iter {
        let t0 = times.as_ref().map(|_| Instant::now());
        let (step, v) = mh_step(kernel, &theta, value, prior.support(), &mut proposal, &mut rng);
        if step.accepted {
            acc += 1;
        }
        theta = step.theta;
        value = v;
        proposal.observe(&theta, iter);
        if let (Some(ts), Some(t0)) = (times.as_mut(), t0) {
            ts.push(t0.elapsed().as_secs_f64());
        }
        samples.push(theta.clone());
        if let StopRule::Mcse { threshold, min_iter, check_every } = config.stop {
            if iter >= min_iter && iter % check_every.max(1) == 0 && mcse_reached(&samples, threshold) {
                break;
            }
        }
    }
    Ok(ChainOutput {
        samples,
        acc_count: acc,
        seed: config.seed,
        wall_time: start.elapsed().as_secs_f64(),
        per_iter_time: times,
    })
}

fn mcse_reached(samples: &[Vec<f64>], threshold: f64) -> bool {
    let p = samples[0].len();
    (0..p).all(|k| {
        let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        mcse_batch_means(&col).is_ok_and(|m| m <= threshold)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergm::{Ergm, UndirectedGraph};
    use crate::prior::UniformBox;
    use crate::types::{BoxDomain, ParamVector};
    use rand::Rng as _;

    fn toy_emulator() -> GpEmulator {
        // log L = -(θ - 0.3)² / (2·0.04) on a 1-D grid
        let design: Vec<ParamVector> = (0..15).map(|i| ParamVector::new(vec![-1.0 + i as f64 / 7.0]).unwrap()).collect();
        let y: Vec<f64> = design.iter().map(|t| -(t[0] - 0.3).powi(2) / 0.08).collect();
        GpEmulator::with_hyper(&design, &y, 10.0, 2.0, 0.0, false).unwrap()
    }

    fn prior1() -> UniformBox {
        UniformBox::new(BoxDomain::new(vec![-1.0], vec![1.0]).unwrap())
    }

    #[test]
    fn identical_states_give_unit_ratio() {
        let em = toy_emulator();
        let pr = prior1();
        assert_eq!(likem_log_ratio(&[0.1], &[0.1], &em, &pr), 0.0);
        let m = Ergm::new(4, 0.25).unwrap();
        let x = m.prepare(&UndirectedGraph::complete(4));
        let y = m.prepare(&UndirectedGraph::empty(4));
        let pr2 = UniformBox::new(BoxDomain::new(vec![-3.0, -1.0], vec![1.0, 2.0]).unwrap());
        assert_eq!(dmh_log_ratio(&[-1.0, 0.5], &[-1.0, 0.5], &m, &x, &y, &pr2), 0.0);
    }

    #[test]
    fn swapped_states_negate_the_ratio() {
        let em = toy_emulator();
        let pr = prior1();
        let mut rng = stream(1, 0);
        let m = Ergm::new(4, 0.25).unwrap();
        let x = m.prepare(&UndirectedGraph::from_edges(4, &[(0, 1), (1, 2)]).unwrap());
        let y = m.prepare(&UndirectedGraph::complete(4));
        let pr2 = UniformBox::new(BoxDomain::new(vec![-3.0, -1.0], vec![1.0, 2.0]).unwrap());
        let em2 = {
            let d: Vec<ParamVector> = (0..12)
                .map(|i| ParamVector::new(vec![-3.0 + 4.0 * (i as f64 / 11.0), -1.0 + 3.0 * ((i * 5 % 12) as f64 / 11.0)]).unwrap())
                .collect();
            let v: Vec<f64> = d.iter().map(|t| t[0].sin() + t[1]).collect();
            GpEmulator::with_hyper(&d, &v, 1.0, 1.0, 0.0, true).unwrap()
        };
        for _ in 0..1000 {
            let a = [rng.random_range(-1.0..1.0)];
            let b = [rng.random_range(-1.0..1.0)];
            assert_eq!(likem_log_ratio(&a, &b, &em, &pr), -likem_log_ratio(&b, &a, &em, &pr));
            let a2 = [rng.random_range(-3.0..1.0), rng.random_range(-1.0..2.0)];
            let b2 = [rng.random_range(-3.0..1.0), rng.random_range(-1.0..2.0)];
            let f = normem_log_ratio(&a2, &b2, &em2, &m, &x, &pr2);
            let r = normem_log_ratio(&b2, &a2, &em2, &m, &x, &pr2);
            assert!((f + r).abs() < 1e-12);
            let f = dmh_log_ratio(&a2, &b2, &m, &x, &y, &pr2);
            let r = dmh_log_ratio(&b2, &a2, &m, &x, &y, &pr2);
            assert!((f + r).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_prior_is_rejected() {
        let em = toy_emulator();
        let pr = prior1();
        let mut prop = ProposalState::diagonal(&[100.0], 0).unwrap();
        let mut rng = stream(2, 0);
        let mut rejected_outside = 0;
        for _ in 0..200 {
            let s = likem_step(&[0.0], &em, &pr, &mut prop, &mut rng);
            if s.log_alpha == f64::NEG_INFINITY {
                assert!(!s.accepted && s.theta == vec![0.0]);
                rejected_outside += 1;
            }
        }
        assert!(rejected_outside > 100);
    }

    #[test]
    fn likem_matches_gaussian_posterior() {
        let em = toy_emulator();
        let pr = prior1();
        let cfg = RunConfig::new(Mode::LikEm, 60_000, 3);
        let out = run_chain::<Ergm>(&cfg, Components::LikEm { emulator: &em }, &pr, &[0.0], ProposalState::diagonal(&[0.04], 5000).unwrap())
            .unwrap();
        let x = out.column(0);
        let m = crate::numeric::mean(&x);
        let sd = crate::numeric::variance(&x).sqrt();
        assert!((m - 0.3).abs() < 0.02 * 0.3 + 0.01, "{m}");
        assert!((sd / 0.2 - 1.0).abs() < 0.05, "{sd}");
    }

    #[test]
    fn runs_are_reproducible_and_guarded() {
        let em = toy_emulator();
        let pr = prior1();
        let run = |seed| {
            let cfg = RunConfig::new(Mode::LikEm, 2000, seed);
            run_chain::<Ergm>(&cfg, Components::LikEm { emulator: &em }, &pr, &[0.0], ProposalState::diagonal(&[0.04], 500).unwrap())
                .unwrap()
                .samples
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
        let cfg = RunConfig::new(Mode::LikEm, 0, 1);
        assert!(matches!(
            run_chain::<Ergm>(&cfg, Components::LikEm { emulator: &em }, &pr, &[0.0], ProposalState::diagonal(&[0.04], 5).unwrap()),
            Err(Error::EmptyInput)
        ));
        let cfg = RunConfig::new(Mode::NormEm, 10, 1);
        assert!(run_chain::<Ergm>(&cfg, Components::LikEm { emulator: &em }, &pr, &[0.0], ProposalState::diagonal(&[0.04], 5).unwrap())
            .is_err());
    }

    #[test]
    fn mcse_rule_stops_early() {
        let em = toy_emulator();
        let pr = prior1();
        let mut cfg = RunConfig::new(Mode::LikEm, 200_000, 4);
        cfg.stop = StopRule::Mcse { threshold: 0.01, min_iter: 2_000, check_every: 500 };
        let out = run_chain::<Ergm>(&cfg, Components::LikEm { emulator: &em }, &pr, &[0.0], ProposalState::diagonal(&[0.04], 1000).unwrap())
            .unwrap();
        assert!(out.n_iter() < 200_000 && out.n_iter() >= 2_000);
        assert!(mcse_batch_means(&out.column(0)).unwrap() <= 0.01);
    }
}
