use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use marl_core::experiments::{cmd_generate, cmd_solve, cmd_sweep, cmd_verify, CliError, ExperimentConfig, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "marl", version, about = "Offline multi-agent RL experiments on tabular Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent jobs; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the game and one dataset per (n, seed).
    Generate(Common),
    /// Run the configured solvers on generated datasets.
    Solve(Common),
    /// Generate, solve and evaluate every (solver, n, seed) cell into a CSV table.
    Sweep(Common),
    /// Replay oracle checks against a solve report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Report to verify.
        #[arg(long)]
        report: PathBuf,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(CliError::config)?;
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Generate(c) => cmd_generate(&load(&c)?, &mut out),
        Command::Solve(c) => cmd_solve(&load(&c)?, c.workers, &mut out),
        Command::Sweep(c) => cmd_sweep(&load(&c)?, c.workers, &mut out),
        Command::Verify { common, report } => cmd_verify(&load(&common)?, &report, &mut out).map(|_| ()),
    }?;
    out.flush().map_err(CliError::config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
