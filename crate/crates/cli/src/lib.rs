//! Command-line front end: configuration, the `simulate`, `sweep`,
//! `verify` and `report` subcommands, manifests and the shared checks.

pub mod checks;
pub mod commands;
pub mod config;
pub mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::{RunOptions, EXIT_CHECK};
use config::{CliOverrides, Mode};
use hsbg::dynamics::{CollisionLaw, EngineConfig};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

#[derive(Debug, Parser)]
#[command(name = "hsbg", version, about = "Hard-sphere dynamics and Boltzmann-Grad sweep estimators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one ensemble and write event logs, histograms and a manifest.
    Simulate(CommonArgs),
    /// Run a Boltzmann-Grad sweep with checkpoints and reports.
    Sweep(CommonArgs),
    /// Run the property suite and write verify_results.csv.
    Verify(CommonArgs),
    /// Regenerate sweep reports from stored checkpoints.
    Report(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    CollisionSign,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set ensemble.replicas=8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 uses all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, hide = true, value_enum)]
    pub inject_fault: Option<Fault>,
    /// Stop a sweep after this many completed entries.
    #[arg(long, hide = true)]
    pub stop_after: Option<usize>,
}

impl Command {
    fn parts(&self) -> (Mode, &CommonArgs) {
        match self {
            Command::Simulate(a) => (Mode::Simulate, a),
            Command::Sweep(a) => (Mode::Sweep, a),
            Command::Verify(a) => (Mode::Verify, a),
            Command::Report(a) => (Mode::Report, a),
        }
    }
}

/// Parses the configuration and dispatches; returns the exit code.
pub fn run(cli: &Cli, cancel: Option<Arc<AtomicBool>>) -> i32 {
    let (mode, args) = cli.command.parts();
    let overrides =
        CliOverrides { set: args.set.clone(), out: args.out.clone(), workers: args.workers, seed: args.seed };
    let cfg = match config::parse_config(args.config.as_deref(), mode, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    let mut engine = EngineConfig::default();
    if args.inject_fault == Some(Fault::CollisionSign) {
        engine.law = CollisionLaw::Flipped;
    }
    let opts = RunOptions { engine, fault_injected: args.inject_fault.is_some(), stop_after: args.stop_after, cancel };
    match mode {
        Mode::Simulate => commands::simulate(&cfg, &opts),
        Mode::Sweep => commands::sweep(&cfg, &opts),
        Mode::Verify => commands::verify(&cfg, &opts),
        Mode::Report => commands::report(&cfg, &opts),
    }
}

/// Cancel flag raised by SIGINT/SIGTERM; a sweep checkpoints and exits.
pub fn install_signal_flag() -> Option<Arc<AtomicBool>> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    ctrlc::set_handler(move || {
        if f.swap(true, Ordering::SeqCst) {
            std::process::exit(commands::EXIT_RUNTIME);
        }
        eprintln!("interrupt: finishing the current entry, then exiting");
    })
    .ok()?;
    Some(flag)
}
