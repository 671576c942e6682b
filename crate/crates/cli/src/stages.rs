//! The pipeline stages.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use funcemu::diagnostics::{format_summary_table, kde_on_grid, silverman_bandwidth, summarize, write_summary_csv};
use funcemu::ergm::{mple, Ergm, MpleFit, UndirectedGraph};
use funcemu::gp::{FitOptions, GpEmulator};
use funcemu::io;
use funcemu::isampling::{build_reference_ensemble, table_from_ensemble, ParticleTable, TableKind};
use funcemu::mcmc::{
    abc_particles, dmh_particles, run_chain, AbcOptions, Components, Mode, ProposalState, RunConfig, StopRule,
};
use funcemu::pointproc::{PointPattern, PointProcess, Window};
use funcemu::prior::UniformBox;
use funcemu::{BoxDomain, ChainOutput, Model, ParamVector};
use serde_json::json;

use crate::config::{ModelConfig, ParticleMethod, PipelineConfig};
use crate::{CliError, CliResult, Context, Manifest};

/// What the pipeline needs from a built-in model beyond [`Model`].
pub trait CliModel: Model + Sized {
    fn from_config(cfg: &PipelineConfig) -> CliResult<Self>;
    fn read_data(&self, path: &Path) -> CliResult<Self::Data>;
    fn write_data(&self, x: &Self::Data, path: &Path) -> CliResult<()>;
    fn describe(&self, x: &Self::Data) -> serde_json::Value;
    /// Maximum pseudolikelihood fit, for models that have one.
    fn mple(&self, x: &Self::Data) -> Option<funcemu::Result<MpleFit>>;
    /// Starting state of every reference chain.
    fn chain_start(&self) -> &'static str;
}

impl CliModel for Ergm {
    fn from_config(cfg: &PipelineConfig) -> CliResult<Self> {
        match cfg.model {
            ModelConfig::Ergm { nodes, tau } => Ok(Ergm::new(nodes, tau)?),
            _ => Err(CliError::Validation("not an ergm config".into())),
        }
    }

    /// Dense 0/1 matrix for `.csv`, else an edge list.
    fn read_data(&self, path: &Path) -> CliResult<UndirectedGraph> {
        let r = io::open(path)?;
        let g = if path.extension().is_some_and(|e| e == "csv") {
            UndirectedGraph::read_dense_csv(r)?
        } else {
            UndirectedGraph::read_edge_list(r, Some(self.n))?
        };
        if g.n() != self.n {
            return Err(CliError::Validation(format!(
                "{} has {} nodes but the config says {}",
                path.display(),
                g.n(),
                self.n
            )));
        }
        Ok(g)
    }

    fn write_data(&self, x: &UndirectedGraph, path: &Path) -> CliResult<()> {
        let mut w = io::create(path)?;
        w.write_all(x.to_edge_list().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn describe(&self, x: &UndirectedGraph) -> serde_json::Value {
        let s = self.prepare(x);
        json!({ "nodes": x.n(), "edges": x.n_edges(), "density": x.density(), "stats": s })
    }

    fn mple(&self, x: &UndirectedGraph) -> Option<funcemu::Result<MpleFit>> {
        Some(mple(x, self.tau))
    }

    fn chain_start(&self) -> &'static str {
        "empty graph"
    }
}

impl CliModel for PointProcess {
    fn from_config(cfg: &PipelineConfig) -> CliResult<Self> {
        match cfg.model {
            ModelConfig::Pointproc { window: [x0, x1, y0, y1], hard_core } => {
                Ok(PointProcess::new(Window::new(x0, x1, y0, y1)?, hard_core)?)
            }
            _ => Err(CliError::Validation("not a pointproc config".into())),
        }
    }

    fn read_data(&self, path: &Path) -> CliResult<PointPattern> {
        let x = PointPattern::read_csv(io::open(path)?, self.window)?;
        if x.len() > 1 && x.min_distance() <= self.hard_core {
            return Err(CliError::Validation(format!(
                "{}: points closer than the hard-core distance {}",
                path.display(),
                self.hard_core
            )));
        }
        Ok(x)
    }

    fn write_data(&self, x: &PointPattern, path: &Path) -> CliResult<()> {
        let mut w = io::create(path)?;
        x.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn describe(&self, x: &PointPattern) -> serde_json::Value {
        json!({ "points": x.len(), "intensity": x.len() as f64 / self.window.area() })
    }

    fn mple(&self, _x: &PointPattern) -> Option<funcemu::Result<MpleFit>> {
        None
    }

    fn chain_start(&self) -> &'static str {
        "binomial hard-core pattern with round(λ|S|) points"
    }
}

/// Calls `$f::<M>` with `M` the configured model type.
macro_rules! with_model {
    ($ctx:expr, $f:ident) => {
        match &$ctx.config.model {
            ModelConfig::Ergm { .. } => $f::<Ergm>($ctx),
            ModelConfig::Pointproc { .. } => $f::<PointProcess>($ctx),
            ModelConfig::Plugin { name } => Err(CliError::Validation(format!(
                "model '{name}' is only available through the library API"
            ))),
        }
    };
}

/// Model, observed data and prior of a run directory.
pub struct Loaded<M: CliModel> {
    pub model: M,
    pub x: M::Data,
    pub prior: BoxDomain,
    mple: Option<funcemu::Result<MpleFit>>,
}

impl<M: CliModel> Loaded<M> {
    pub fn load(ctx: &Context) -> CliResult<Self> {
        let model = M::from_config(&ctx.config)?;
        let path = ctx.config.data_path();
        if !path.exists() {
            return Err(CliError::Validation(format!(
                "data file {} not found; run `funcemu simulate` first or set data.path",
                path.display()
            )));
        }
        let x = model.read_data(&path)?;
        Self::from_data(ctx, model, x)
    }

    pub fn from_data(ctx: &Context, model: M, x: M::Data) -> CliResult<Self> {
        let mple = model.mple(&x);
        let mut l = Self { model, x, prior: BoxDomain::new(vec![0.0], vec![1.0])?, mple };
        l.prior = resolve_prior(&ctx.config, &l)?;
        Ok(l)
    }

    pub fn mple(&self) -> CliResult<&MpleFit> {
        match &self.mple {
            Some(Ok(f)) => Ok(f),
            Some(Err(e)) => Err(CliError::Numerical(format!("MPLE: {e}"))),
            None => Err(CliError::Validation("this model has no MPLE".into())),
        }
    }

    /// `run.init`, else the MPLE when it lies in the prior box, else the box centre.
    pub fn init(&self, cfg: &PipelineConfig) -> CliResult<Vec<f64>> {
        if let Some(init) = &cfg.run.init {
            if !self.prior.contains(init) {
                return Err(CliError::Validation(format!("run.init {init:?} is outside the prior box")));
            }
            return Ok(init.clone());
        }
        match &self.mple {
            Some(Ok(f)) if self.prior.contains(&f.theta) => Ok(f.theta.clone()),
            _ => Ok(self.prior.center()),
        }
    }

    /// `run.proposal_sd`, else the MPLE covariance, else `(width/25)²` per axis.
    pub fn proposal(&self, cfg: &PipelineConfig) -> CliResult<ProposalState> {
        let adapt = cfg.run.adapt_until;
        if let Some(sd) = &cfg.run.proposal_sd {
            let v: Vec<f64> = sd.iter().map(|s| s * s).collect();
            return Ok(ProposalState::diagonal(&v, adapt)?);
        }
        if let Some(Ok(f)) = &self.mple {
            if let Ok(p) = ProposalState::from_rows(&f.cov, adapt) {
                return Ok(p);
            }
        }
        let v: Vec<f64> = (0..self.prior.dim()).map(|k| (self.prior.width(k) / 25.0).powi(2)).collect();
        Ok(ProposalState::diagonal(&v, adapt)?)
    }
}

fn resolve_prior<M: CliModel>(cfg: &PipelineConfig, l: &Loaded<M>) -> CliResult<BoxDomain> {
    if let (Some(lo), Some(hi)) = (&cfg.prior.lower, &cfg.prior.upper) {
        return Ok(BoxDomain::new(lo.clone(), hi.clone())?);
    }
    let k = cfg.prior.mple_window.unwrap_or(5.0);
    let f = l.mple()?;
    Ok(BoxDomain::new(
        f.theta.iter().zip(&f.se).map(|(t, s)| t - k * s).collect(),
        f.theta.iter().zip(&f.se).map(|(t, s)| t + k * s).collect(),
    )?)
}

fn manifest(ctx: &Context, stage: &str, seed: u64, t0: Instant, outputs: &[&str], details: serde_json::Value) -> Manifest {
    Manifest {
        stage: stage.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: ctx.config_hash.clone(),
        master_seed: ctx.config.seed,
        stage_seed: seed,
        workers: ctx.config.workers,
        wall_time_s: t0.elapsed().as_secs_f64(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        details,
    }
}

fn domain_json(d: &BoxDomain) -> serde_json::Value {
    json!({ "lower": d.lower(), "upper": d.upper() })
}

pub fn kind_name(k: TableKind) -> &'static str {
    match k {
        TableKind::NormEm => "normem",
        TableKind::LikEm => "likem",
    }
}

fn require(path: &Path, what: &str, hint: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{what} {} not found; {hint}", path.display())))
    }
}

pub fn simulate(ctx: &Context) -> CliResult<String> {
    with_model!(ctx, simulate_with)
}

fn simulate_with<M: CliModel>(ctx: &Context) -> CliResult<String> {
    let t0 = Instant::now();
    let cfg = &ctx.config;
    let truth = cfg
        .data
        .truth
        .as_ref()
        .ok_or_else(|| CliError::Validation("simulate needs data.truth".into()))?;
    let model = M::from_config(cfg)?;
    let seed = ctx.seed("simulate");
    let mut rng = funcemu::rng::stream(seed, 0);
    let mut x = model.initial_state(truth, &mut rng);
    model.simulate(&mut x, truth, cfg.data.cycles, &mut rng);
    let path = cfg.data_path();
    model.write_data(&x, &path)?;
    let desc = model.describe(&x);
    let file = path.display().to_string();
    manifest(ctx, "simulate", seed, t0, &[&file], json!({ "truth": truth, "cycles": cfg.data.cycles, "data": desc }))
        .write(ctx, "simulate.json")?;
    Ok(format!("simulated data written to {file}\n{desc}\n"))
}

pub fn particles(ctx: &Context) -> CliResult<String> {
    with_model!(ctx, particles_with)
}

fn particles_with<M: CliModel>(ctx: &Context) -> CliResult<String> {
    let t0 = Instant::now();
    let cfg = &ctx.config;
    let l = Loaded::<M>::load(ctx)?;
    let seed = ctx.seed("particles");
    let pc = &cfg.particles;
    let (parts, details) = match cfg.particle_method() {
        ParticleMethod::Abc => {
            let f = l.mple()?;
            let res = abc_particles(
                &l.model,
                &l.x,
                &l.prior,
                &f.theta,
                &f.se,
                AbcOptions {
                    n_design: pc.n_design,
                    quantile: pc.quantile,
                    n_particles: pc.d,
                    cycles: pc.cycles,
                    standardize: pc.standardize,
                    seed,
                    workers: cfg.workers,
                },
            )?;
            let details = json!({
                "method": "abc",
                "prior": domain_json(&l.prior),
                "mple": f.theta,
                "mple_se": f.se,
                "domain1": domain_json(&res.domain1),
                "domain2": domain_json(&res.domain2),
                "kept": res.kept.len(),
                "tolerance": res.tolerance,
            });
            (res.particles, details)
        }
        ParticleMethod::Dmh => {
            let init = l.init(cfg)?;
            let inner = pc.inner_cycles.unwrap_or(cfg.default_inner_cycles());
            let (ps, iters) = dmh_particles(
                &l.model,
                &l.x,
                &UniformBox::new(l.prior.clone()),
                &init,
                l.proposal(cfg)?,
                pc.d,
                pc.burnin,
                inner,
                seed,
            )?;
            let details = json!({
                "method": "dmh",
                "prior": domain_json(&l.prior),
                "init": init,
                "iterations": iters,
                "burnin": pc.burnin,
                "inner_cycles": inner,
            });
            (ps, details)
        }
    };
    io::write_params_csv(io::create(&ctx.path("particles.csv"))?, &parts)?;
    manifest(ctx, "particles", seed, t0, &["particles.csv"], details.clone()).write(ctx, "particles.json")?;
    Ok(format!("{} particles written to {}\n", parts.len(), ctx.path("particles.csv").display()))
}

pub fn read_particles(ctx: &Context) -> CliResult<Vec<ParamVector>> {
    let path = ctx.path("particles.csv");
    require(&path, "particle file", "run `funcemu particles` first")?;
    let ps = io::read_params_csv(io::open(&path)?)?;
    if ps.is_empty() {
        return Err(CliError::Validation(format!("{} holds no particles", path.display())));
    }
    if ps[0].dim() != ctx.config.dim() {
        return Err(CliError::Validation(format!(
            "{} has {} columns, the model has {} parameters",
            path.display(),
            ps[0].dim(),
            ctx.config.dim()
        )));
    }
    Ok(ps)
}

pub fn precompute(ctx: &Context) -> CliResult<String> {
    with_model!(ctx, precompute_with)
}

fn precompute_with<M: CliModel>(ctx: &Context) -> CliResult<String> {
    let t0 = Instant::now();
    let cfg = &ctx.config;
    let l = Loaded::<M>::load(ctx)?;
    let parts = read_particles(ctx)?;
    let tilde = match &cfg.precompute.theta_tilde {
        Some(t) => t.clone(),
        None => match l.mple() {
            Ok(f) => f.theta.clone(),
            Err(_) => {
                let p = parts[0].dim();
                (0..p).map(|k| parts.iter().map(|t| t[k]).sum::<f64>() / parts.len() as f64).collect()
            }
        },
    };
    let tilde = ParamVector::new(tilde)?;
    let seed = ctx.seed("precompute");
    let cycles = cfg.precompute_cycles();
    let ens = build_reference_ensemble(&l.model, &tilde, cfg.precompute.n_samples, cycles, seed, cfg.workers)?;
    let x_prep = l.model.prepare(&l.x);
    let mut outputs = Vec::new();
    let mut report = String::new();
    for &kind in &cfg.precompute.tables {
        let table = table_from_ensemble(&l.model, &parts, &ens, kind, Some(&x_prep), cfg.workers)?;
        let name = format!("table_{}.csv", kind_name(kind));
        io::write_table_csv(io::create(&ctx.path(&name))?, &table)?;
        io::write_json(&ctx.path(&format!("table_{}.json", kind_name(kind))), &io::table_meta(&table))?;
        report.push_str(&format!("{} rows written to {}\n", table.len(), ctx.path(&name).display()));
        outputs.push(name);
    }
    let outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    let details = json!({
        "theta_tilde": tilde,
        "n_samples": cfg.precompute.n_samples,
        "cycles": cycles,
        "particles": parts.len(),
        "chain_start": l.model.chain_start(),
    });
    manifest(ctx, "precompute", seed, t0, &outs, details).write(ctx, "precompute.json")?;
    Ok(report)
}

pub fn read_table(ctx: &Context, kind: TableKind) -> CliResult<ParticleTable> {
    let name = kind_name(kind);
    let path = ctx.path(&format!("table_{name}.csv"));
    let hint = if ctx.config.precompute.tables.contains(&kind) {
        "run `funcemu precompute` first".to_string()
    } else {
        format!("add \"{name}\" to precompute.tables and run `funcemu precompute`")
    };
    require(&path, &format!("{name} table"), &hint)?;
    let meta_path = ctx.path(&format!("table_{name}.json"));
    let meta: Option<io::TableMeta> = if meta_path.exists() { Some(io::read_json(&meta_path)?) } else { None };
    let t = io::read_table_csv(io::open(&path)?, meta.as_ref())?;
    if t.kind != kind {
        return Err(CliError::Validation(format!("{} does not hold a {name} table", path.display())));
    }
    Ok(t)
}

pub fn fit_emulator(ctx: &Context, table: &ParticleTable) -> CliResult<GpEmulator> {
    let e = &ctx.config.emulator;
    let opts = FitOptions {
        standardize: e.standardize,
        starts: e.starts,
        max_iters: e.max_iters,
        seed: ctx.seed(&format!("emulator-{}", kind_name(table.kind))),
    };
    Ok(GpEmulator::fit_with(&table.particles, &table.values, opts)?)
}

pub fn run(ctx: &Context) -> CliResult<String> {
    with_model!(ctx, run_with)
}

fn run_with<M: CliModel>(ctx: &Context) -> CliResult<String> {
    let t0 = Instant::now();
    let cfg = &ctx.config;
    let mode = cfg.run.mode;
    // fail fast before any loading or fitting
    let table = match mode {
        Mode::NormEm => Some(read_table(ctx, TableKind::NormEm)?),
        Mode::LikEm => Some(read_table(ctx, TableKind::LikEm)?),
        Mode::Dmh => None,
    };
    let l = Loaded::<M>::load(ctx)?;
    let emulator = match &table {
        Some(t) => {
            let em = fit_emulator(ctx, t)?;
            em.save(&ctx.path(&format!("emulator_{mode}.json")))?;
            Some(em)
        }
        None => None,
    };
    let seed = ctx.seed(&format!("run-{mode}"));
    let mut rc = RunConfig::new(mode, cfg.run.n_iter, seed);
    rc.inner_cycles = cfg.run.inner_cycles.unwrap_or(cfg.default_inner_cycles());
    rc.record_timing = cfg.run.record_timing;
    if let Some(th) = cfg.run.mcse_threshold {
        rc.stop = StopRule::mcse(th);
    }
    let prior = UniformBox::new(l.prior.clone());
    let init = l.init(cfg)?;
    let components = match (&emulator, mode) {
        (Some(em), Mode::NormEm) => Components::NormEm { model: &l.model, x_obs: &l.x, emulator: em },
        (Some(em), _) => Components::LikEm { emulator: em },
        (None, _) => Components::Dmh { model: &l.model, x_obs: &l.x },
    };
    let chain = run_chain(&rc, components, &prior, &init, l.proposal(cfg)?)?;
    let rows = summarize(&chain, None)?;

    let chain_file = format!("chain_{mode}.csv");
    let summary_file = format!("summary_{mode}.csv");
    io::write_chain_csv(io::create(&ctx.path(&chain_file))?, &chain)?;
    let mut w = io::create(&ctx.path(&summary_file))?;
    write_summary_csv(&rows, false, &mut w)?;
    w.flush()?;
    let mut outputs = vec![chain_file.clone(), summary_file];
    if let Some(times) = &chain.per_iter_time {
        let name = format!("timing_{mode}.csv");
        io::write_rows(io::create(&ctx.path(&name))?, &["seconds".to_string()], times.iter().map(|t| vec![*t]))?;
        outputs.push(name);
    }
    if emulator.is_some() {
        outputs.push(format!("emulator_{mode}.json"));
    }
    let details = json!({
        "mode": mode,
        "n_iter": chain.n_iter(),
        "inner_cycles": rc.inner_cycles,
        "acceptance_rate": chain.acceptance_rate(),
        "chain_wall_time_s": chain.wall_time,
        "seconds_per_iteration": chain.wall_time / chain.n_iter() as f64,
        "init": init,
        "prior": domain_json(&l.prior),
        "emulator": emulator.as_ref().map(|e| e.hyper()),
        "summary": rows,
    });
    let outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    manifest(ctx, &format!("run-{mode}"), seed, t0, &outs, details).write(ctx, &format!("run_{mode}.json"))?;
    Ok(format!(
        "{mode}: {} iterations, acceptance {:.3}, chain written to {}\n{}",
        chain.n_iter(),
        chain.acceptance_rate(),
        ctx.path(&chain_file).display(),
        format_summary_table(&rows)
    ))
}

fn read_chain(ctx: &Context, mode: Mode) -> CliResult<ChainOutput> {
    let path = ctx.path(&format!("chain_{mode}.csv"));
    require(&path, &format!("{mode} chain"), &format!("run `funcemu run` with run.mode = \"{mode}\" first"))?;
    let mut chain = io::read_chain_csv(io::open(&path)?)?;
    let run_path = ctx.path(&format!("run_{mode}.json"));
    if run_path.exists() {
        let v: serde_json::Value = io::read_json(&run_path)?;
        if let Some(t) = v["details"]["chain_wall_time_s"].as_f64() {
            chain.wall_time = t;
        }
        if let Some(a) = v["details"]["acceptance_rate"].as_f64() {
            chain.acc_count = (a * chain.n_iter() as f64).round() as usize;
        }
    }
    Ok(chain)
}

pub fn diagnose(ctx: &Context) -> CliResult<String> {
    let t0 = Instant::now();
    let cfg = &ctx.config;
    let modes: Vec<Mode> = match &cfg.diagnose.modes {
        Some(m) => m.clone(),
        None => [Mode::NormEm, Mode::LikEm, Mode::Dmh]
            .into_iter()
            .filter(|m| ctx.path(&format!("chain_{m}.csv")).exists())
            .collect(),
    };
    if modes.is_empty() {
        return Err(CliError::Validation(format!(
            "no chains in {}; run `funcemu run` first",
            ctx.out().display()
        )));
    }
    let gold = cfg.diagnose.gold.map(|g| read_chain(ctx, g)).transpose()?;
    let mut report = String::new();
    let mut outputs = Vec::new();
    let mut all = serde_json::Map::new();
    for &mode in &modes {
        let chain = read_chain(ctx, mode)?;
        let g = gold.as_ref().filter(|_| cfg.diagnose.gold != Some(mode));
        let rows = summarize(&chain, g)?;
        let name = format!("diagnose_{mode}.csv");
        let mut w = io::create(&ctx.path(&name))?;
        write_summary_csv(&rows, false, &mut w)?;
        w.flush()?;
        outputs.push(name);
        if cfg.diagnose.kde {
            let name = format!("kde_{mode}.csv");
            write_kde(&ctx.path(&name), &chain)?;
            outputs.push(name);
        }
        report.push_str(&format!("{mode} (acceptance {:.3})\n{}\n", chain.acceptance_rate(), format_summary_table(&rows)));
        all.insert(mode.to_string(), serde_json::to_value(&rows).map_err(|e| CliError::Validation(e.to_string()))?);
    }
    let outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    manifest(ctx, "diagnose", 0, t0, &outs, json!({ "gold": cfg.diagnose.gold, "summaries": all }))
        .write(ctx, "diagnose.json")?;
    Ok(report)
}

/// Columns `param` (1-based), `x`, `density`; 512 points per marginal.
fn write_kde(path: &Path, chain: &ChainOutput) -> CliResult<()> {
    let mut rows = Vec::new();
    for k in 0..chain.dim() {
        let x = chain.column(k);
        let bw = silverman_bandwidth(&x);
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bw;
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
        let m = funcemu::diagnostics::KDE_GRID;
        let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
        let dens = kde_on_grid(&x, bw, &grid);
        rows.extend(grid.iter().zip(&dens).map(|(g, d)| vec![(k + 1) as f64, *g, *d]));
    }
    let header = ["param", "x", "density"].map(String::from);
    io::write_rows(io::create(path)?, &header, rows)?;
    Ok(())
}
