use std::path::PathBuf;
use std::process::ExitCode;

use arcutoff::commands::{run, Command, Invocation};
use arcutoff::error::CliError;
use clap::{Parser, Subcommand};

/// Simulate auto-regressive coordinate-update chains and measure their
/// distance to stationarity.
#[derive(Debug, Parser)]
#[command(name = "arcutoff", version)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "arcutoff-out")]
    out: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Estimate the top Lyapunov exponent alpha.
    EstimateAlpha {
        /// Use uniform random scan whatever the configuration says.
        #[arg(long)]
        random_scan: bool,
    },
    /// Forward trajectories, final states and stationary samples.
    Simulate,
    /// Total variation to stationarity as a function of k, for each n.
    TvCurve,
    /// Lower and upper bounds on the total variation for a list of k.
    TvBounds,
    /// Total variation at k = ln n / (-alpha) + beta.
    CutoffProfile,
    /// Self-checks of the model and the estimators.
    Verify {
        /// Advance with a chain of halved damping so that the stationarity check must fail.
        #[arg(long)]
        negative_control: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let command = match cli.command {
        Sub::EstimateAlpha { random_scan } => Command::EstimateAlpha { random_scan },
        Sub::Simulate => Command::Simulate,
        Sub::TvCurve => Command::TvCurve,
        Sub::TvBounds => Command::TvBounds,
        Sub::CutoffProfile => Command::CutoffProfile,
        Sub::Verify { negative_control } => Command::Verify { negative_control },
    };
    match run(Invocation { config: cli.config, seed: cli.seed, out: cli.out, command }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(CliError::exit_code(&e))
        }
    }
}
