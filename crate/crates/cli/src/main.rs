use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kslab_cli::config::RunConfig;
use kslab_cli::{certify, simulate, sweep, verify, Options, EXIT_ERROR};

/// Numerical lab for a one-dimensional quasilinear Keller-Segel system.
///
/// Exit codes: 0 success (horizon reached, certified, checks passed),
/// 1 error, 2 blow-up detected, 3 certificate inconclusive, 4 verify check failed.
#[derive(Parser, Debug)]
#[command(name = "kslab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for sweeps (default: available parallelism)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for output files
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Suppress progress messages
    #[arg(long, global = true)]
    quiet: bool,
    #[arg(long, global = true, hide = true)]
    flip_drift: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the solver; writes diagnostics, terminal state and a JSON summary
    Simulate { config: PathBuf },
    /// Evaluate the blow-up certificate and print it as JSON
    Certify { config: PathBuf },
    /// Certify (and optionally simulate) over a parameter grid
    Sweep { config: PathBuf },
    /// Run the diagnostics battery and report pass/fail per check
    Verify { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        out: cli.out,
        jobs: cli
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        quiet: cli.quiet,
        flip_drift: cli.flip_drift,
    };
    let (path, cmd): (_, fn(&RunConfig, &Options) -> anyhow::Result<i32>) = match &cli.command {
        Command::Simulate { config } => (config, simulate::cmd_simulate),
        Command::Certify { config } => (config, certify::cmd_certify),
        Command::Sweep { config } => (config, sweep::cmd_sweep),
        Command::Verify { config } => (config, verify::cmd_verify),
    };
    let code = RunConfig::load(path)
        .and_then(|config| cmd(&config, &opts))
        .unwrap_or_else(|e| {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        });
    ExitCode::from(code as u8)
}
