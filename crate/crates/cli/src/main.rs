//! `saddleflow`: command-line front end for the saddle-to-saddle toolkit.
//!
//! Exit codes: 0 when every enabled check passes, 1 when a check fails or a
//! stage errors, 2 on usage errors.

mod commands;
mod output;
mod run_all;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "saddleflow", version, about = "Saddle-to-saddle dynamics of diagonal linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Dataset given as two CSV files.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Feature matrix, one sample per row.
    #[arg(long)]
    pub x: PathBuf,
    /// Targets, one per row.
    #[arg(long)]
    pub y: PathBuf,
    /// Skip one header line in every input CSV.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Jump times, saddles and duals of the limit process.
    Path {
        #[command(flatten)]
        data: DataArgs,
        /// KKT tolerance of the inner constrained solves.
        #[arg(long)]
        tol: Option<f64>,
        /// JSON output (default: stdout).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Optional CSV table `k, t, beta_*, loss`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient flow at one initialisation scale, in accelerated time.
    Simulate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, allow_negative_numbers = true)]
        log10_alpha: f64,
        /// Final accelerated time (default: 1.25 × last jump time).
        #[arg(long)]
        t_end: Option<f64>,
        /// Relative integration tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// CSV `t, beta_*, loss` (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional JSON summary.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Saddles joined by heteroclinic orbits, in arc-length time.
    Hybrid {
        #[command(flatten)]
        data: DataArgs,
        /// Allowed gap between an orbit's end and the next saddle.
        #[arg(long)]
        tol: Option<f64>,
        /// CSV `segment, kind, tau, beta_*` (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional JSON with every segment.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Homotopy Lasso path down to `--lambda-min`.
    Lasso {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.0)]
        lambda_min: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Orthogonal matching pursuit with `--k` atoms.
    Omp {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Key-equation and structural checks, optionally the sparse-recovery
    /// predictions and a convergence sweep over α.
    Verify {
        #[command(flatten)]
        data: DataArgs,
        /// Check the sparse-recovery predictions against `--beta-star`.
        #[arg(long, requires = "beta_star")]
        rip: bool,
        /// Planted signal, as one CSV row or column.
        #[arg(long)]
        beta_star: Option<PathBuf>,
        /// Comma-separated log10 α values, e.g. `-2,-4,-8,-16`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        sweep: Vec<f64>,
        /// Final accelerated time of the sweep (default: 1.25 × last jump time).
        #[arg(long)]
        t_end: Option<f64>,
        /// Key-equation tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// JSON report (default: stdout).
        #[arg(long)]
        json: Option<PathBuf>,
        /// CSV sweep table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded Gaussian design with noiseless targets; writes X.csv, y.csv
    /// and spec.json.
    Generate {
        /// Generator spec `{n, d, seed, covariance, beta_star}` as JSON.
        #[arg(long, conflicts_with = "seed", required_unless_present = "seed")]
        spec: Option<PathBuf>,
        /// Use the (n, d) = (5, 7), β* = (10, 20, 0, …) setting with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline from a JSON experiment config; writes a JSON bundle and
    /// CSV artifacts.
    RunAll {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Invalid invocation; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn dispatch(command: Command) -> anyhow::Result<bool> {
    use commands::*;
    match command {
        Command::Path { data, tol, json, out } => path(&data, tol, json.as_deref(), out.as_deref()),
        Command::Simulate { data, log10_alpha, t_end, tol, out, json } => {
            simulate(&data, log10_alpha, t_end, tol, out.as_deref(), json.as_deref())
        }
        Command::Hybrid { data, tol, out, json } => hybrid(&data, tol, out.as_deref(), json.as_deref()),
        Command::Lasso { data, lambda_min, json } => lasso(&data, lambda_min, json.as_deref()),
        Command::Omp { data, k, json } => omp(&data, k, json.as_deref()),
        Command::Verify { data, rip, beta_star, sweep, t_end, tol, json, out } => {
            let opts = VerifyOptions { beta_star: beta_star.filter(|_| rip), sweep, t_end, tol };
            verify(&data, &opts, json.as_deref(), out.as_deref())
        }
        Command::Generate { spec, seed, out } => generate(spec.as_deref(), seed, &out),
        Command::RunAll { config, out } => run_all::run_all(&config, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
