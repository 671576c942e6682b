use std::sync::atomic::{AtomicUsize, Ordering};

use funcemu::design::latin_hypercube;
use funcemu::diagnostics::kde_tv;
use funcemu::ergm::{exact_log_z_bruteforce, Ergm, GridPosterior, UndirectedGraph, DEFAULT_TAU};
use funcemu::gp::GpEmulator;
use funcemu::isampling::{precompute_table, TableKind};
use funcemu::mcmc::{
    abc_particles, dmh_particles, run_chain, AbcOptions, Components, Mode, ProposalState, RunConfig,
};
use funcemu::prior::{Prior, UniformBox};
use funcemu::rng::{stream, Rng};
use funcemu::{BoxDomain, ChainOutput, Model, ParamVector};

/// Counts sampler calls of the wrapped ERGM.
struct Counting {
    inner: Ergm,
    calls: AtomicUsize,
}

impl Model for Counting {
    type Data = UndirectedGraph;
    type Prepared = [f64; 2];
    fn dim(&self) -> usize {
        2
    }
    fn prepare(&self, x: &UndirectedGraph) -> [f64; 2] {
        self.inner.prepare(x)
    }
    fn log_h_prepared(&self, s: &[f64; 2], theta: &[f64]) -> f64 {
        self.inner.log_h_prepared(s, theta)
    }
    fn initial_state(&self, theta: &[f64], rng: &mut Rng) -> UndirectedGraph {
        self.inner.initial_state(theta, rng)
    }
    fn simulate(&self, state: &mut UndirectedGraph, theta: &[f64], cycles: usize, rng: &mut Rng) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.simulate(state, theta, cycles, rng)
    }
    fn summary(&self, x: &UndirectedGraph) -> Option<Vec<f64>> {
        self.inner.summary(x)
    }
}

fn small_graph() -> UndirectedGraph {
    UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap()
}

fn prior_box() -> BoxDomain {
    BoxDomain::new(vec![-3.0, -1.0], vec![1.0, 2.0]).unwrap()
}

fn proposal() -> ProposalState {
    ProposalState::diagonal(&[0.3, 0.2], 5_000).unwrap()
}

fn max_marginal_tv(chain: &ChainOutput, gold: &[Vec<f64>]) -> f64 {
    (0..2)
        .map(|a| {
            let g: Vec<f64> = gold.iter().map(|t| t[a]).collect();
            kde_tv(&chain.column(a), &g).unwrap()
        })
        .fold(0.0, f64::max)
}

fn particles(d: usize, seed: u64) -> Vec<ParamVector> {
    latin_hypercube(d, &prior_box(), &mut stream(seed, 0)).unwrap()
}

#[test]
fn all_samplers_match_the_grid_posterior_on_four_nodes() {
    let m = Ergm::new(4, DEFAULT_TAU).unwrap();
    let x = small_graph();
    let prior = UniformBox::new(prior_box());
    let gold = GridPosterior::new(&x, DEFAULT_TAU, &prior_box(), 51).unwrap().sample(20_000, &mut stream(99, 0));
    let init = prior_box().center();
    let parts = particles(100, 3);

    let exact_z: Vec<f64> = parts.iter().map(|t| exact_log_z_bruteforce(4, t, DEFAULT_TAU).unwrap()).collect();
    let em_exact = GpEmulator::fit(&parts, &exact_z).unwrap();
    let chain = run_chain(
        &RunConfig::new(Mode::NormEm, 30_000, 1),
        Components::NormEm { model: &m, x_obs: &x, emulator: &em_exact },
        &prior,
        &init,
        proposal(),
    )
    .unwrap();
    let tv = max_marginal_tv(&chain, &gold);
    assert!(tv < 0.05, "normem with exact log Z: {tv}");

    let tilde = ParamVector::new(init.clone()).unwrap();
    let z = precompute_table(&m, &parts, &tilde, 5000, 10, TableKind::NormEm, None, 4, 1).unwrap();
    let em_z = GpEmulator::fit(&z.particles, &z.values).unwrap();
    let chain = run_chain(
        &RunConfig::new(Mode::NormEm, 30_000, 2),
        Components::NormEm { model: &m, x_obs: &x, emulator: &em_z },
        &prior,
        &init,
        proposal(),
    )
    .unwrap();
    let tv = max_marginal_tv(&chain, &gold);
    assert!(tv < 0.08, "normem: {tv}");

    let l = precompute_table(&m, &parts, &tilde, 5000, 10, TableKind::LikEm, Some(&x), 5, 1).unwrap();
    let em_l = GpEmulator::fit(&l.particles, &l.values).unwrap();
    let chain = run_chain(
        &RunConfig::new(Mode::LikEm, 30_000, 3),
        Components::<Ergm>::LikEm { emulator: &em_l },
        &prior,
        &init,
        proposal(),
    )
    .unwrap();
    let tv = max_marginal_tv(&chain, &gold);
    assert!(tv < 0.08, "likem: {tv}");

    let mut cfg = RunConfig::new(Mode::Dmh, 30_000, 4);
    cfg.inner_cycles = 50;
    let chain = run_chain(&cfg, Components::Dmh { model: &m, x_obs: &x }, &prior, &init, proposal()).unwrap();
    assert!(chain.samples.iter().all(|t| prior.support().contains(t)));
    let tv = max_marginal_tv(&chain, &gold);
    assert!(tv < 0.08, "dmh: {tv}");
}

#[test]
fn emulated_samplers_never_simulate() {
    let m = Counting { inner: Ergm::new(4, DEFAULT_TAU).unwrap(), calls: AtomicUsize::new(0) };
    let x = small_graph();
    let prior = UniformBox::new(prior_box());
    let init = prior_box().center();
    let parts = particles(30, 8);
    let tilde = ParamVector::new(init.clone()).unwrap();
    let z = precompute_table(&m, &parts, &tilde, 50, 2, TableKind::NormEm, None, 1, 1).unwrap();
    let l = precompute_table(&m, &parts, &tilde, 50, 2, TableKind::LikEm, Some(&x), 1, 1).unwrap();
    assert_eq!(m.calls.load(Ordering::Relaxed), 100);
    m.calls.store(0, Ordering::Relaxed);

    let em_z = GpEmulator::fit(&z.particles, &z.values).unwrap();
    let em_l = GpEmulator::fit(&l.particles, &l.values).unwrap();
    run_chain(
        &RunConfig::new(Mode::NormEm, 2_000, 1),
        Components::NormEm { model: &m, x_obs: &x, emulator: &em_z },
        &prior,
        &init,
        proposal(),
    )
    .unwrap();
    run_chain(&RunConfig::new(Mode::LikEm, 2_000, 1), Components::<Counting>::LikEm { emulator: &em_l }, &prior, &init, proposal())
        .unwrap();
    assert_eq!(m.calls.load(Ordering::Relaxed), 0);

    let out = run_chain(&RunConfig::new(Mode::Dmh, 500, 1), Components::Dmh { model: &m, x_obs: &x }, &prior, &init, proposal())
        .unwrap();
    // one auxiliary simulation per proposal inside the prior box
    let calls = m.calls.load(Ordering::Relaxed);
    assert!(calls > 0 && calls <= 500);
    assert_eq!(out.n_iter(), 500);
}

#[test]
fn dmh_particles_are_distinct_and_inside_the_prior() {
    let m = Ergm::new(4, DEFAULT_TAU).unwrap();
    let prior = UniformBox::new(prior_box());
    let (ps, iters) =
        dmh_particles(&m, &small_graph(), &prior, &prior_box().center(), proposal(), 40, 100, 5, 7).unwrap();
    assert_eq!(ps.len(), 40);
    assert!(iters > 100);
    assert!(ps.iter().all(|t| prior.support().contains(t)));
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            assert_ne!(ps[i], ps[j]);
        }
    }
    let (one, _) = dmh_particles(&m, &small_graph(), &prior, &prior_box().center(), proposal(), 1, 0, 1, 7).unwrap();
    assert_eq!(one.len(), 1);
}

#[test]
fn abc_with_quantile_one_keeps_every_design_point() {
    let m = Ergm::new(6, DEFAULT_TAU).unwrap();
    let x = UndirectedGraph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4)]).unwrap();
    let wide = BoxDomain::new(vec![-10.0, -10.0], vec![10.0, 10.0]).unwrap();
    let opts = AbcOptions {
        n_design: 60,
        quantile: 1.0,
        n_particles: 20,
        cycles: 2,
        standardize: false,
        seed: 3,
        workers: 1,
    };
    let res = abc_particles(&m, &x, &wide, &[-1.0, 0.5], &[0.2, 0.1], opts).unwrap();
    assert_eq!(res.kept.len(), 60);
    for a in 0..2 {
        let lo = res.kept.iter().map(|t| t[a]).fold(f64::INFINITY, f64::min);
        let hi = res.kept.iter().map(|t| t[a]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.domain2.lower()[a], lo);
        assert_eq!(res.domain2.upper()[a], hi);
    }
    assert_eq!(res.particles.len(), 20);
    assert!(res.particles.iter().all(|t| res.domain2.contains(t)));
    assert!(res.domain1.contains_box(&res.domain2));

    let tight = AbcOptions { quantile: 0.03, ..opts };
    assert!(abc_particles(&m, &x, &wide, &[-1.0, 0.5], &[0.2, 0.1], tight).is_err());
}

#[test]
fn likem_iteration_cost_does_not_depend_on_network_size() {
    let prior_dom = BoxDomain::new(vec![-7.0, 0.5], vec![-5.0, 3.5]).unwrap();
    let prior = UniformBox::new(prior_dom.clone());
    let parts = latin_hypercube(100, &prior_dom, &mut stream(2, 0)).unwrap();
    let tilde = ParamVector::new(vec![-6.0, 2.0]).unwrap();
    let emulator = |n: usize| -> GpEmulator {
        let m = Ergm::new(n, DEFAULT_TAU).unwrap();
        let mut rng = stream(5, 0);
        let mut x = m.initial_state(&[-6.0, 2.0], &mut rng);
        m.simulate(&mut x, &[-6.0, 2.0], 1, &mut rng);
        let t = precompute_table(&m, &parts, &tilde, 2, 1, TableKind::LikEm, Some(&x), 1, 1).unwrap();
        GpEmulator::fit(&t.particles, &t.values).unwrap()
    };
    let per_iter = |em: &GpEmulator, seed: u64| -> f64 {
        let out = run_chain(
            &RunConfig::new(Mode::LikEm, 20_000, seed),
            Components::<Ergm>::LikEm { emulator: em },
            &prior,
            &[-6.0, 2.0],
            ProposalState::diagonal(&[0.01, 0.01], 0).unwrap(),
        )
        .unwrap();
        out.wall_time / out.n_iter() as f64
    };
    let (em_small, em_large) = (emulator(200), emulator(800));
    // interleaved repetitions; the minimum is the least disturbed by other load
    let (mut small, mut large) = (f64::INFINITY, f64::INFINITY);
    for r in 0..7 {
        small = small.min(per_iter(&em_small, r));
        large = large.min(per_iter(&em_large, r));
    }
    let ratio = large / small;
    assert!((0.8..1.25).contains(&ratio), "per-iteration time ratio {ratio}");
}
