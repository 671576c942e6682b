use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use funcemu_cli::{execute, Command, Context, Overrides};

#[derive(Parser)]
#[command(name = "funcemu", version, about = "Function-emulation MCMC pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Pipeline config (TOML).
    #[arg(long, global = true, default_value = "funcemu.toml")]
    config: PathBuf,
    /// Use this seed for the stage instead of the one derived from the master seed.
    #[arg(long, global = true)]
    stage_seed: Option<u64>,
    /// Worker threads; 0 means all available.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Simulate observed data at data.truth.
    Simulate,
    /// Choose particles by ABC or a short DMH run.
    Particles,
    /// Importance-sampling tables at the particles.
    Precompute,
    /// Fit the emulator (if any) and run the chain for run.mode.
    Run,
    /// Summaries, TV against a gold chain and KDE curves.
    Diagnose,
    /// Per-iteration timings across network sizes.
    Bench,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Particles => Command::Particles,
        Cmd::Precompute => Command::Precompute,
        Cmd::Run => Command::Run,
        Cmd::Diagnose => Command::Diagnose,
        Cmd::Bench => Command::Bench,
    };
    let overrides = Overrides { stage_seed: cli.stage_seed, workers: cli.workers, out: cli.out };
    let result = Context::from_file(&cli.config, &overrides).and_then(|ctx| execute(command, &ctx));
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error ({}): {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
