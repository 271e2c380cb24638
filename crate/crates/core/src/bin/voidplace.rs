use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use voidplace::app::{self, FitArtifact, PlacementReport, RunConfig};
use voidplace::placement::binomial;
use voidplace::Error;

#[derive(Parser)]
#[command(name = "voidplace", version, about = "Sensor placement for rare-event detection on a 1-D corridor")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw synthetic counts from the configured ground truth.
    Simulate,
    /// Laplace-fit the latent log-intensity to the configured counts.
    Fit,
    /// Greedy sensor placement on a fitted posterior.
    Place {
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Number of sensors (defaults to m_max).
        #[arg(long)]
        m: Option<usize>,
    },
    /// Monte Carlo void probability and Jensen bounds along the greedy order.
    Evaluate {
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long)]
        placement: Option<PathBuf>,
    },
    /// Greedy against exhaustive search for small sensor counts.
    Compare {
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Comma separated sensor counts (defaults to compare_m).
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        /// Also write wall-clock times to compare_timings.csv.
        #[arg(long)]
        timings: bool,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = cli.out_dir {
        config.out_dir = dir;
    }
    let fit_path = |p: Option<PathBuf>, c: &RunConfig| p.unwrap_or_else(|| c.out_dir.join("fit.json"));
    app::with_workers(cli.workers, move || -> Result<(), Error> {
        match cli.command {
            Command::Simulate => {
                let out = app::cmd_simulate(&config)?;
                println!("{}", out.counts_path.display());
                println!("{}", out.truth_path.display());
            }
            Command::Fit => {
                let out = app::cmd_fit(&config)?;
                let d = &out.artifact.diagnostics;
                eprintln!("converged in {} iterations, log evidence {}", d.iterations, d.log_marginal_likelihood);
                println!("{}", out.artifact_path.display());
                println!("{}", out.quantiles_path.display());
            }
            Command::Place { fit, m } => {
                let fit = FitArtifact::load(fit_path(fit, &config))?;
                let out = app::cmd_place(&config, &fit, m.unwrap_or(config.m_max))?;
                if out.report.lazy_matches_greedy == Some(false) {
                    eprintln!("warning: lazy greedy disagrees with plain greedy");
                }
                if let Some(why) = &out.report.brute_force_skipped {
                    eprintln!("brute force skipped: {why}");
                }
                println!("{}", out.report_path.display());
                println!("{}", out.trace_path.display());
            }
            Command::Evaluate { fit, placement } => {
                let fit_file = FitArtifact::load(fit_path(fit, &config))?;
                let report = PlacementReport::load(placement.unwrap_or_else(|| config.out_dir.join("placement.json")))?;
                let out = app::cmd_evaluate(&config, &fit_file, &report)?;
                println!("{}", out.csv_path.display());
            }
            Command::Compare { fit, m, timings } => {
                let fit = FitArtifact::load(fit_path(fit, &config))?;
                let ms = m.unwrap_or_else(|| config.compare_m.clone());
                let out = app::cmd_compare(&config, &fit, &ms, timings)?;
                println!("{}", out.csv_path.display());
                if let Some(p) = out.timings_path {
                    println!("{}", p.display());
                }
                for r in out.rows.iter().filter(|r| r.skipped.is_some()) {
                    eprintln!("M={} skipped: {}", r.m, r.skipped.as_deref().unwrap_or_default());
                }
                // The table is still written; the exit status flags the skipped rows.
                if let Some(r) = out.rows.iter().find(|r| r.skipped.is_some()) {
                    let k = config.candidates().len();
                    return Err(Error::EnumerationCap { required: binomial(k, r.m), cap: config.enum_cap });
                }
            }
        }
        Ok(())
    })?
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(app::exit_code(&e) as u8)
        }
    }
}
