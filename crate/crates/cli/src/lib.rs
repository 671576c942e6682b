//! Command-line pipeline: `simulate → particles → precompute → run → diagnose`,
//! plus `bench`. Every stage reads its inputs from and writes its outputs to
//! one run directory.

pub mod bench;
pub mod config;
pub mod stages;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::PipelineConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<funcemu::Error> for CliError {
    fn from(e: funcemu::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Particles,
    Precompute,
    Run,
    Diagnose,
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Particles => "particles",
            Command::Precompute => "precompute",
            Command::Run => "run",
            Command::Diagnose => "diagnose",
            Command::Bench => "bench",
        }
    }
}

/// Command-line overrides of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub stage_seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// A loaded config with overrides applied.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub stage_seed: Option<u64>,
    pub config_hash: String,
}

impl Context {
    pub fn new(mut config: PipelineConfig, overrides: &Overrides) -> CliResult<Self> {
        if let Some(w) = overrides.workers {
            config.workers = w;
        }
        if let Some(o) = &overrides.out {
            config.out = o.clone();
        }
        config.validate()?;
        // worker count and output directory do not change results
        let mut hashed = config.clone();
        hashed.workers = 0;
        hashed.out = PathBuf::new();
        let canonical = serde_json::to_string(&hashed).map_err(|e| CliError::Validation(e.to_string()))?;
        let config_hash = format!("{:016x}", funcemu::rng::derive_seed(0, &canonical));
        Ok(Self { config, stage_seed: overrides.stage_seed, config_hash })
    }

    pub fn from_file(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        Self::new(PipelineConfig::load(path)?, overrides)
    }

    /// Seed of a stage: the override if given, else derived from the master seed.
    pub fn seed(&self, stage: &str) -> u64 {
        self.stage_seed.unwrap_or_else(|| funcemu::rng::derive_seed(self.config.seed, stage))
    }

    pub fn out(&self) -> &Path {
        &self.config.out
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.config.out.join(file)
    }
}

/// Per-stage record written next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub stage: String,
    pub version: &'static str,
    pub config_hash: String,
    pub master_seed: u64,
    pub stage_seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub details: serde_json::Value,
}

impl Manifest {
    /// Writes `file` and records the stage in the run's `manifest.json`.
    pub fn write(&self, ctx: &Context, file: &str) -> CliResult<()> {
        funcemu::io::write_json(&ctx.path(file), self)?;
        let path = ctx.path("manifest.json");
        let mut stages = match funcemu::io::read_json::<serde_json::Value>(&path) {
            Ok(v) if v["stages"].is_object() => v["stages"].clone(),
            _ => serde_json::json!({}),
        };
        stages[&self.stage] = serde_json::json!({
            "file": file,
            "config_hash": self.config_hash,
            "stage_seed": self.stage_seed,
            "workers": self.workers,
            "wall_time_s": self.wall_time_s,
            "outputs": self.outputs,
        });
        let top = serde_json::json!({
            "config_hash": ctx.config_hash,
            "version": self.version,
            "master_seed": self.master_seed,
            "config": ctx.config,
            "stages": stages,
        });
        funcemu::io::write_json(&path, &top)?;
        Ok(())
    }
}

/// Runs one command and returns the text report.
pub fn execute(cmd: Command, ctx: &Context) -> CliResult<String> {
    std::fs::create_dir_all(ctx.out())
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", ctx.out().display())))?;
    match cmd {
        Command::Simulate => stages::simulate(ctx),
        Command::Particles => stages::particles(ctx),
        Command::Precompute => stages::precompute(ctx),
        Command::Run => stages::run(ctx),
        Command::Diagnose => stages::diagnose(ctx),
        Command::Bench => bench::bench(ctx),
    }
}
