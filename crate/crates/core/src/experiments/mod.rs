//! Experiment harness behind the `marl` binary: builtin games, dataset
//! generation, solver runs, sweeps over sample sizes and seeds, and report
//! verification.

pub mod builtin;
pub mod commands;
pub mod config;

pub use commands::{cmd_generate, cmd_solve, cmd_sweep, cmd_verify, CliError, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY};
pub use config::{ExperimentConfig, SolverKind};
