use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use convshare::harness::{emit_csv, manifest_path, run_sweep, validate_suite_with, write_csv, write_manifest, SweepConfig, ValidateOptions};
use convshare::special::{bessel_k1, psi};

#[derive(Parser)]
#[command(name = "convshare", version, about = "Spectrum-sharing link simulator and capacity sweeps")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a TOML file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the seed from the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count from the file.
        #[arg(long)]
        trials: Option<usize>,
        /// CSV destination; a manifest is written next to it. Prints to
        /// stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every oracle and print a pass/fail ledger.
    Validate {
        #[arg(long, default_value_t = ValidateOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = ValidateOptions::default().trials)]
        trials: usize,
        /// Frames for the time-domain checks.
        #[arg(long, default_value_t = ValidateOptions::default().frames)]
        frames: usize,
        /// Points per random search against waterfilling.
        #[arg(long, default_value_t = ValidateOptions::default().search_points)]
        search_points: usize,
        /// Inject a cyclic prefix one sample too short.
        #[arg(long)]
        shorten_cp: bool,
        /// Also check capacity anchors and trends.
        #[arg(long)]
        figures: bool,
    },
    /// Evaluate Ψ(A) = e^{1/A} E1(1/A).
    Psi { a: f64 },
    /// Closed-form PU outage probability 1 − 2κK1(2κ).
    Outage { kappa: f64 },
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Sweep { config, seed, trials, out } => {
            let mut cfg = SweepConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            let result = run_sweep(&cfg)?;
            match out {
                Some(path) => {
                    emit_csv(&path, &result.rows)?;
                    let manifest = manifest_path(&path);
                    write_manifest(&manifest, &result.manifest)?;
                    eprintln!("wrote {} rows to {} and {}", result.rows.len(), path.display(), manifest.display());
                }
                None => write_csv(std::io::stdout().lock(), &result.rows)?,
            }
            Ok(true)
        }
        Command::Validate { seed, trials, frames, search_points, shorten_cp, figures } => {
            let opts = ValidateOptions { seed, trials, frames, search_points, shorten_cp, figures, ..ValidateOptions::default() };
            let start = std::time::Instant::now();
            let report = validate_suite_with(&opts, |o| println!("{o} ({:.1} s)", start.elapsed().as_secs_f64()));
            let failed = report.failures().count();
            println!("{} checks, {failed} failed", report.outcomes.len());
            Ok(report.all_passed())
        }
        Command::Psi { a } => {
            println!("{:e}", psi(a)?);
            Ok(true)
        }
        Command::Outage { kappa } => {
            if !(kappa > 0.0 && kappa.is_finite()) {
                bail!("kappa must be positive and finite, got {kappa}");
            }
            let y = 2.0 * kappa;
            println!("{:e}", (1.0 - y * bessel_k1(y)?).clamp(0.0, 1.0));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
