//! The pipeline configuration file (TOML).

use std::path::{Path, PathBuf};

use funcemu::isampling::TableKind;
use funcemu::mcmc::Mode;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub model: ModelConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub particles: ParticlesConfig,
    #[serde(default)]
    pub precompute: PrecomputeConfig,
    #[serde(default)]
    pub emulator: EmulatorConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub diagnose: DiagnoseConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Ergm {
        nodes: usize,
        #[serde(default = "default_tau")]
        tau: f64,
    },
    Pointproc {
        /// `[xmin, xmax, ymin, ymax]`.
        window: [f64; 4],
        #[serde(default = "default_hard_core")]
        hard_core: f64,
    },
    Plugin {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Observed data; see [`PipelineConfig::data_path`].
    pub path: Option<PathBuf>,
    /// Generating parameters for `simulate`.
    pub truth: Option<Vec<f64>>,
    #[serde(default = "default_sim_cycles")]
    pub cycles: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { path: None, truth: None, cycles: default_sim_cycles() }
    }
}

/// Uniform prior: an explicit box, or (ERGM) `MPLE ± mple_window · se`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub mple_window: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParticleMethod {
    Abc,
    Dmh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesConfig {
    pub method: Option<ParticleMethod>,
    #[serde(default = "default_d")]
    pub d: usize,
    /// ABC design size `D`.
    #[serde(default = "default_n_design")]
    pub n_design: usize,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    /// Sampler cycles per ABC simulation.
    #[serde(default = "default_abc_cycles")]
    pub cycles: usize,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    pub inner_cycles: Option<usize>,
}

impl Default for ParticlesConfig {
    fn default() -> Self {
        Self {
            method: None,
            d: default_d(),
            n_design: default_n_design(),
            quantile: default_quantile(),
            cycles: default_abc_cycles(),
            standardize: false,
            burnin: default_burnin(),
            inner_cycles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecomputeConfig {
    /// Importance-sampling draws `N`.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Cycles per reference chain.
    pub cycles: Option<usize>,
    /// Reference parameter; defaults to the MPLE (ERGM) or the particle mean.
    pub theta_tilde: Option<Vec<f64>>,
    /// Tables to build from the shared ensemble.
    #[serde(default = "default_kinds")]
    pub tables: Vec<TableKind>,
}

impl Default for PrecomputeConfig {
    fn default() -> Self {
        Self { n_samples: default_n_samples(), cycles: None, theta_tilde: None, tables: default_kinds() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulatorConfig {
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self { standardize: true, starts: default_starts(), max_iters: default_max_iters() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    pub inner_cycles: Option<usize>,
    /// Stop once every batch-means MCSE is below this value.
    pub mcse_threshold: Option<f64>,
    #[serde(default = "default_adapt_until")]
    pub adapt_until: usize,
    pub init: Option<Vec<f64>>,
    /// Initial proposal standard deviations.
    pub proposal_sd: Option<Vec<f64>>,
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            n_iter: default_n_iter(),
            inner_cycles: None,
            mcse_threshold: None,
            adapt_until: default_adapt_until(),
            init: None,
            proposal_sd: None,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Chains to summarise; defaults to every chain present.
    pub modes: Option<Vec<Mode>>,
    /// Chain used as the reference for TV.
    pub gold: Option<Mode>,
    /// Also write per-marginal KDE curves.
    #[serde(default)]
    pub kde: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// DMH iterations timed per size.
    #[serde(default = "default_bench_dmh")]
    pub dmh_iter: usize,
    /// Emulated iterations timed per size.
    #[serde(default = "default_bench_emulated")]
    pub emulated_iter: usize,
    #[serde(default = "default_bench_reps")]
    pub repeats: usize,
    /// Particles behind the timed emulators.
    #[serde(default = "default_bench_d")]
    pub d: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: default_sizes(),
            dmh_iter: default_bench_dmh(),
            emulated_iter: default_bench_emulated(),
            repeats: default_bench_reps(),
            d: default_bench_d(),
        }
    }
}

fn default_workers() -> usize {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("run")
}
fn default_tau() -> f64 {
    funcemu::ergm::DEFAULT_TAU
}
fn default_hard_core() -> f64 {
    funcemu::pointproc::DEFAULT_HARD_CORE
}
fn default_sim_cycles() -> usize {
    100
}
fn default_d() -> usize {
    400
}
fn default_n_design() -> usize {
    3000
}
fn default_quantile() -> f64 {
    0.03
}
fn default_abc_cycles() -> usize {
    10
}
fn default_burnin() -> usize {
    1000
}
fn default_n_samples() -> usize {
    1000
}
fn default_kinds() -> Vec<TableKind> {
    vec![TableKind::NormEm, TableKind::LikEm]
}
fn yes() -> bool {
    true
}
fn default_starts() -> usize {
    5
}
fn default_max_iters() -> u64 {
    400
}
fn default_mode() -> Mode {
    Mode::NormEm
}
fn default_n_iter() -> usize {
    25_000
}
fn default_adapt_until() -> usize {
    funcemu::mcmc::DEFAULT_ADAPT_UNTIL
}
fn default_sizes() -> Vec<usize> {
    vec![200, 283, 400]
}
fn default_bench_dmh() -> usize {
    30
}
fn default_bench_emulated() -> usize {
    100_000
}
fn default_bench_reps() -> usize {
    3
}
fn default_bench_d() -> usize {
    100
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn dim(&self) -> usize {
        match self.model {
            ModelConfig::Ergm { .. } => 2,
            ModelConfig::Pointproc { .. } => 4,
            ModelConfig::Plugin { .. } => 0,
        }
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        match &self.model {
            ModelConfig::Plugin { name } => {
                return bad(format!(
                    "model '{name}': plug-in models are driven through the library API (implement funcemu::Model)"
                ))
            }
            ModelConfig::Ergm { nodes, tau } => {
                if *nodes < 2 {
                    return bad(format!("ergm needs at least 2 nodes, got {nodes}"));
                }
                if !(*tau > 0.0) {
                    return bad(format!("tau must be positive, got {tau}"));
                }
            }
            ModelConfig::Pointproc { window, hard_core } => {
                if !(window[0] < window[1] && window[2] < window[3]) {
                    return bad(format!("window {window:?} is empty"));
                }
                if !(*hard_core >= 0.0) {
                    return bad(format!("hard_core must be >= 0, got {hard_core}"));
                }
            }
        }
        let p = self.dim();
        let check_len = |name: &str, v: &Option<Vec<f64>>| -> Result<(), CliError> {
            match v {
                Some(v) if v.len() != p => {
                    Err(CliError::Validation(format!("{name} has {} entries, model has {p} parameters", v.len())))
                }
                Some(v) if v.iter().any(|x| !x.is_finite()) => {
                    Err(CliError::Validation(format!("{name} must be finite")))
                }
                _ => Ok(()),
            }
        };
        check_len("data.truth", &self.data.truth)?;
        check_len("prior.lower", &self.prior.lower)?;
        check_len("prior.upper", &self.prior.upper)?;
        check_len("precompute.theta_tilde", &self.precompute.theta_tilde)?;
        check_len("run.init", &self.run.init)?;
        check_len("run.proposal_sd", &self.run.proposal_sd)?;
        match (&self.prior.lower, &self.prior.upper, self.prior.mple_window) {
            (Some(lo), Some(hi), None) => {
                if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return bad("prior.lower must be below prior.upper".into());
                }
            }
            (None, None, Some(k)) => {
                if !matches!(self.model, ModelConfig::Ergm { .. }) {
                    return bad("prior.mple_window is only available for the ergm model".into());
                }
                if !(k > 0.0) {
                    return bad(format!("prior.mple_window must be positive, got {k}"));
                }
            }
            (None, None, None) => {
                if !matches!(self.model, ModelConfig::Ergm { .. }) {
                    return bad("prior.lower and prior.upper are required for this model".into());
                }
            }
            _ => return bad("give either prior.lower and prior.upper, or prior.mple_window".into()),
        }
        if self.particles.d == 0 || self.particles.n_design == 0 || self.precompute.n_samples == 0 {
            return bad("particles.d, particles.n_design and precompute.n_samples must be positive".into());
        }
        if self.particles.n_design < self.particles.d {
            return bad("particles.n_design must be at least particles.d".into());
        }
        if !(self.particles.quantile > 0.0 && self.particles.quantile <= 1.0) {
            return bad(format!("particles.quantile must be in (0, 1], got {}", self.particles.quantile));
        }
        if self.particle_method() == ParticleMethod::Abc && !matches!(self.model, ModelConfig::Ergm { .. }) {
            return bad("ABC particles need summary statistics; use particles.method = \"dmh\"".into());
        }
        if self.run.n_iter == 0 {
            return bad("run.n_iter must be positive".into());
        }
        if self.run.inner_cycles == Some(0) || self.particles.inner_cycles == Some(0) {
            return bad("inner_cycles must be >= 1".into());
        }
        if self.precompute.cycles == Some(0) || self.particles.cycles == 0 || self.data.cycles == 0 {
            return bad("cycle counts must be >= 1".into());
        }
        if self.precompute.tables.is_empty() {
            return bad("precompute.tables is empty".into());
        }
        if let Some(sd) = &self.run.proposal_sd {
            if sd.iter().any(|s| !(*s > 0.0)) {
                return bad("run.proposal_sd entries must be positive".into());
            }
        }
        if self.bench.sizes.iter().any(|&n| n < 2) || self.bench.repeats == 0 || self.bench.d < 2 {
            return bad("bench sizes must be >= 2, repeats >= 1 and d >= 2".into());
        }
        Ok(())
    }

    pub fn particle_method(&self) -> ParticleMethod {
        self.particles.method.unwrap_or(match self.model {
            ModelConfig::Ergm { .. } => ParticleMethod::Abc,
            _ => ParticleMethod::Dmh,
        })
    }

    /// Auxiliary cycles per DMH step: 1 Gibbs cycle (ERGM), 10 birth-death cycles (point process).
    pub fn default_inner_cycles(&self) -> usize {
        match self.model {
            ModelConfig::Ergm { .. } => 1,
            _ => 10,
        }
    }

    pub fn precompute_cycles(&self) -> usize {
        self.precompute.cycles.unwrap_or(match self.model {
            ModelConfig::Ergm { .. } => 30,
            _ => 10,
        })
    }

    /// Observed data: `data.path`, else `<out>/data.edges` (ERGM edge list)
    /// or `<out>/data.csv` (point pattern).
    pub fn data_path(&self) -> PathBuf {
        let default = match self.model {
            ModelConfig::Ergm { .. } => "data.edges",
            _ => "data.csv",
        };
        self.data.path.clone().unwrap_or_else(|| self.out.join(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ERGM: &str = r#"
seed = 7
[model]
kind = "ergm"
nodes = 30
"#;

    #[test]
    fn defaults_fill_in() {
        let c = PipelineConfig::from_toml(ERGM).unwrap();
        assert_eq!(c.workers, 1);
        assert_eq!(c.particles.d, 400);
        assert_eq!(c.particles.n_design, 3000);
        assert_eq!(c.precompute.n_samples, 1000);
        assert_eq!(c.run.n_iter, 25_000);
        assert_eq!(c.run.mode, Mode::NormEm);
        assert_eq!(c.particle_method(), ParticleMethod::Abc);
        assert_eq!(c.default_inner_cycles(), 1);
        assert_eq!(c.data_path(), PathBuf::from("run/data.edges"));
    }

    #[test]
    fn validation_errors() {
        let with = |extra: &str| PipelineConfig::from_toml(&format!("{ERGM}{extra}"));
        assert!(matches!(with("[data]\ntruth = [1.0]\n"), Err(CliError::Validation(_))));
        assert!(with("[prior]\nlower = [0.0, 0.0]\nupper = [-1.0, 1.0]\n").is_err());
        assert!(with("[prior]\nlower = [0.0, 0.0]\n").is_err());
        assert!(with("[particles]\nd = 10\nn_design = 5\n").is_err());
        assert!(with("[run]\nmode = \"gibbs\"\n").is_err());
        assert!(with("[run]\nunknown = 1\n").is_err());
        let pp = "seed = 1\n[model]\nkind = \"pointproc\"\nwindow = [0.0, 100.0, 0.0, 100.0]\n";
        assert!(PipelineConfig::from_toml(pp).is_err());
        let pp_ok = format!("{pp}[prior]\nlower = [1e-4, 1.0, 10.0, 0.0]\nupper = [5e-4, 2.0, 20.0, 1.0]\n");
        let c = PipelineConfig::from_toml(&pp_ok).unwrap();
        assert_eq!(c.particle_method(), ParticleMethod::Dmh);
        assert!(PipelineConfig::from_toml(&format!("{pp_ok}[particles]\nmethod = \"abc\"\n")).is_err());
        let plugin = "seed = 1\n[model]\nkind = \"plugin\"\nname = \"mine\"\n";
        assert!(PipelineConfig::from_toml(plugin).is_err());
    }
}
