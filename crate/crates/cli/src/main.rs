//! `ggsm-vif`: score image pairs, evaluate bounds, fit MGGDs, simulate GGSM
//! channels and run the oracle verification suite.
//!
//! Exit codes: 0 success, 1 internal or verification failure, 2 bad input.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Format;

#[derive(Parser)]
#[command(name = "ggsm-vif", version, about = "GGSM analysis of the VIF image quality index")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a distorted image against its reference.
    Score(ScoreArgs),
    /// Closed-form bounds and approximation for one block.
    Bounds(BoundsArgs),
    /// Fit an MGGD to a CSV sample matrix by moment matching.
    FitMggd(FitArgs),
    /// Compare bounds, approximation and Monte Carlo MI on synthetic blocks.
    Simulate(SimulateArgs),
    /// Run the oracle verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct ScoreArgs {
    pub reference: PathBuf,
    pub distorted: PathBuf,
    /// Flat key=value config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub block_side: Option<usize>,
    /// Fixed shape of U.
    #[arg(long, conflicts_with = "estimate_alpha")]
    pub alpha: Option<f64>,
    /// Estimate the shape per subband (experimental).
    #[arg(long)]
    pub estimate_alpha: bool,
    /// Neural noise: rel:<factor>, abs:<variance> or a bare relative factor.
    #[arg(long)]
    pub sigma_n: Option<String>,
    /// Blocks per channel window.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub dim: usize,
    /// Scatter rows separated by ';', entries by ','. Default: identity.
    #[arg(long)]
    pub scatter: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub z: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_v2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_n2: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    /// CSV with a `dim=M` header row and one sample per row.
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Correlation of the AR(1) scatter `ρ^|i−j|` of U.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// const:<z>, uniform:<lo>,<hi> or lognormal:<mu>,<sigma>.
    #[arg(long, default_value = "const:1")]
    pub z_law: String,
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_v2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_n2: f64,
    /// Number of blocks.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Outer Monte Carlo samples per block.
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
    /// Inner Monte Carlo samples per outer sample.
    #[arg(long, default_value_t = 1000)]
    pub inner: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Reduced sample sizes (smoke test; not a substitute for the full run).
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated subset of criteria to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let result = match cli.command {
        Command::Score(a) => commands::score(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::FitMggd(a) => commands::fit_mggd(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
