//! Per-iteration cost of DMH and the emulated samplers across network sizes.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use funcemu::design::latin_hypercube;
use funcemu::ergm::Ergm;
use funcemu::io;
use funcemu::isampling::{build_reference_ensemble, table_from_ensemble, TableKind};
use funcemu::mcmc::{run_chain, Components, Mode, RunConfig};
use funcemu::prior::UniformBox;
use funcemu::rng::stream;
use funcemu::{Model, ParamVector};
use serde::Serialize;
use serde_json::json;

use crate::config::ModelConfig;
use crate::stages::{fit_emulator, Loaded};
use crate::{CliError, CliResult, Context, Manifest};

const MODES: [Mode; 3] = [Mode::Dmh, Mode::NormEm, Mode::LikEm];

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub algorithm: Mode,
    pub n: usize,
    pub seconds_per_iter: f64,
}

/// Least-squares slope of `ln t` on `ln n`; `None` with fewer than two distinct sizes.
pub fn loglog_slope(ns: &[usize], ts: &[f64]) -> Option<f64> {
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if x.len() < 2 || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

pub fn bench(ctx: &Context) -> CliResult<String> {
    let t0 = Instant::now();
    let cfg = &ctx.config;
    let ModelConfig::Ergm { tau, .. } = cfg.model else {
        return Err(CliError::Validation("bench runs on the ergm model; set model.kind = \"ergm\"".into()));
    };
    let truth = cfg
        .data
        .truth
        .as_ref()
        .ok_or_else(|| CliError::Validation("bench simulates its networks and needs data.truth".into()))?;
    let b = &cfg.bench;
    let seed = ctx.seed("bench");
    struct Setup {
        l: Loaded<Ergm>,
        prior: UniformBox,
        init: Vec<f64>,
        em_z: funcemu::gp::GpEmulator,
        em_l: funcemu::gp::GpEmulator,
    }
    let mut setups = Vec::new();
    for (idx, &n) in b.sizes.iter().enumerate() {
        let idx = idx as u64;
        let model = Ergm::new(n, tau)?;
        let mut rng = stream(seed, 3 * idx);
        let mut x = model.initial_state(truth, &mut rng);
        model.simulate(&mut x, truth, cfg.data.cycles, &mut rng);
        let l = Loaded::from_data(ctx, model, x)?;
        let prior = UniformBox::new(l.prior.clone());
        let init = l.init(cfg)?;

        // emulator accuracy is irrelevant here, only its size d
        let parts = latin_hypercube(b.d, &l.prior, &mut stream(seed, 3 * idx + 1))?;
        let tilde = ParamVector::new(init.clone())?;
        let ens = build_reference_ensemble(&l.model, &tilde, 2, 1, seed ^ idx, cfg.workers)?;
        let xp = l.model.prepare(&l.x);
        let em_z = fit_emulator(ctx, &table_from_ensemble(&l.model, &parts, &ens, TableKind::NormEm, None, 1)?)?;
        let em_l =
            fit_emulator(ctx, &table_from_ensemble(&l.model, &parts, &ens, TableKind::LikEm, Some(&xp), 1)?)?;
        setups.push(Setup { l, prior, init, em_z, em_l });
    }

    // sizes interleaved within each round so drift in machine speed is not confounded with n
    let mut best = vec![[f64::INFINITY; 3]; setups.len()];
    for r in 0..b.repeats as u64 {
        for (idx, st) in setups.iter().enumerate() {
            for (k, mode) in MODES.into_iter().enumerate() {
                let iters = if mode == Mode::Dmh { b.dmh_iter } else { b.emulated_iter };
                let mut rc = RunConfig::new(mode, iters, seed ^ (r << 32) ^ idx as u64);
                rc.inner_cycles = 1;
                let comp = match mode {
                    Mode::Dmh => Components::Dmh { model: &st.l.model, x_obs: &st.l.x },
                    Mode::NormEm => Components::NormEm { model: &st.l.model, x_obs: &st.l.x, emulator: &st.em_z },
                    Mode::LikEm => Components::LikEm { emulator: &st.em_l },
                };
                let out = run_chain(&rc, comp, &st.prior, &st.init, st.l.proposal(cfg)?)?;
                best[idx][k] = best[idx][k].min(out.wall_time / out.n_iter() as f64);
            }
        }
        log::info!("bench round {} of {} done", r + 1, b.repeats);
    }
    let mut rows = Vec::new();
    for (idx, &n) in b.sizes.iter().enumerate() {
        for (k, mode) in MODES.into_iter().enumerate() {
            rows.push(BenchRow { algorithm: mode, n, seconds_per_iter: best[idx][k] });
        }
    }

    let mut w = io::create(&ctx.path("bench.csv"))?;
    writeln!(w, "algorithm,n,seconds_per_iter")?;
    for r in &rows {
        writeln!(w, "{},{},{:?}", r.algorithm, r.n, r.seconds_per_iter)?;
    }
    w.flush()?;

    let mut slopes = BTreeMap::new();
    for mode in MODES {
        let (ns, ts): (Vec<usize>, Vec<f64>) =
            rows.iter().filter(|r| r.algorithm == mode).map(|r| (r.n, r.seconds_per_iter)).unzip();
        slopes.insert(mode_name(mode), loglog_slope(&ns, &ts));
    }
    let n_max = *b.sizes.iter().max().expect("validated non-empty");
    let at = |m: Mode| rows.iter().find(|r| r.algorithm == m && r.n == n_max).map(|r| r.seconds_per_iter);
    let slowest_emulated = at(Mode::NormEm).unwrap_or(f64::NAN).max(at(Mode::LikEm).unwrap_or(f64::NAN));
    let speedup = at(Mode::Dmh).unwrap_or(f64::NAN) / slowest_emulated;

    let mut report = format!("{:<8} {:>6} {:>16}\n", "algo", "n", "s/iter");
    for r in &rows {
        report.push_str(&format!("{:<8} {:>6} {:>16.4e}\n", r.algorithm.to_string(), r.n, r.seconds_per_iter));
    }
    for (m, s) in &slopes {
        match s {
            Some(s) => report.push_str(&format!("log-log slope {m}: {s:.3}\n")),
            None => report.push_str(&format!("log-log slope {m}: n/a (one size)\n")),
        }
    }
    report.push_str(&format!("DMH / slowest emulated at n={n_max}: {speedup:.1}x\n"));

    let details = json!({ "rows": rows, "slopes": slopes, "n_max": n_max, "speedup_at_n_max": speedup });
    Manifest {
        stage: "bench".into(),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: ctx.config_hash.clone(),
        master_seed: cfg.seed,
        stage_seed: seed,
        workers: cfg.workers,
        wall_time_s: t0.elapsed().as_secs_f64(),
        outputs: vec!["bench.csv".into()],
        details,
    }
    .write(ctx, "bench.json")?;
    Ok(report)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::NormEm => "normem",
        Mode::LikEm => "likem",
        Mode::Dmh => "dmh",
    }
}
