use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqemp_cli::{run, RunOptions};

/// Simulation and verification experiments for sequential empirical processes.
#[derive(Parser, Debug)]
#[command(name = "seqemp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment configuration.
    #[arg(long, global = true, default_value = "seqemp.toml")]
    config: PathBuf,

    /// Master seed; replicate r uses a fixed hash of (seed, r).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the replicate count of the selected experiment.
    #[arg(long, global = true)]
    replicates: Option<u64>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write simulated rows as CSV.
    Simulate,
    /// Fit-then-verify run of the maximal inequality.
    VerifyMaximal,
    /// Stability of the fitted moment constant under mixing.
    MomentFit,
    /// Covariance inequality for product functionals.
    Covariance,
    /// Scaling of the chaining bound against the exact half-line supremum.
    ChainingScaling,
    /// Modulus-of-continuity exceedance tables.
    Aec,
    /// Increment scaling of the smoothed process.
    Lipschitz,
    /// Bracketing numbers, integrals and the convergence region.
    Bracketing,
    /// Hypothesis checklist with a verdict bundle.
    Pipeline,
    /// CUSUM change-point statistic under the model and an alternative.
    Cusum,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyMaximal => "verify-maximal",
            Command::MomentFit => "moment-fit",
            Command::Covariance => "covariance",
            Command::ChainingScaling => "chaining-scaling",
            Command::Aec => "aec",
            Command::Lipschitz => "lipschitz",
            Command::Bracketing => "bracketing",
            Command::Pipeline => "pipeline",
            Command::Cusum => "cusum",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opt = RunOptions {
        subcommand: cli.command.name().to_string(),
        config_path: cli.config,
        seed: cli.seed,
        out: cli.out,
        replicates: cli.replicates,
        threads: cli.threads,
    };
    match run(&opt) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
