use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hdamp_core::analysis::fit_rate_log_resampled;
use hdamp_core::harness::output::{rate_row, report_rows, RATE_HEADER};
use hdamp_core::harness::{read_csv_column, reproduce_section6, run_scenario, write_artifacts, RunReport};
use hdamp_core::ScenarioConfig;

#[derive(Parser)]
#[command(name = "hdamp", version, about = "Perturbed inertial dynamics with Hessian-driven damping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV files and plot script.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `out` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the 12-run quartic experiment grid.
    #[command(name = "reproduce-sec6")]
    ReproduceSec6 {
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a power law to one column of a trajectory CSV.
    Rates {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "f_gap")]
        col: String,
        /// `lo:hi`; defaults to the last 80% of the time span.
        #[arg(long)]
        window: Option<String>,
    },
    /// Run a scenario without writing files; the exit code is the verdict.
    Certify {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Exit code when the run completed but a certification failed.
const NOT_CERTIFIED: u8 = 1;
/// Exit code for invalid input or a failed run.
const FAILURE: u8 = 2;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(FAILURE)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load(&config)?;
            let Some(dir) = out.or_else(|| cfg.out.clone()) else {
                bail!("no output directory: pass --out or set `out` in the config");
            };
            let report = run_scenario(&cfg).context("scenario failed")?;
            write_artifacts(&report, &dir).with_context(|| format!("writing {}", dir.display()))?;
            print_summary(&report);
            println!("wrote {}", dir.display());
            Ok(verdict(&report))
        }
        Command::Certify { config } => {
            let cfg = load(&config)?;
            let report = run_scenario(&cfg).context("scenario failed")?;
            print_summary(&report);
            Ok(verdict(&report))
        }
        Command::ReproduceSec6 { out } => {
            let report = reproduce_section6(Some(&out)).context("experiment grid failed")?;
            print!("{}", report.comparison_csv()?);
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Rates { input, col, window } => {
            let window = window.as_deref().map(parse_window).transpose()?;
            let (t, v) = read_csv_column(&input, &col)?;
            let r = fit_rate_log_resampled(&t, &v, window)
                .with_context(|| format!("fitting column `{col}` of {}", input.display()))?;
            println!("{}", RATE_HEADER.join(","));
            println!("{}", rate_row(&col, &r).join(","));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').context("window must look like lo:hi")?;
    let lo: f64 = a.trim().parse().with_context(|| format!("bad window start `{a}`"))?;
    let hi: f64 = b.trim().parse().with_context(|| format!("bad window end `{b}`"))?;
    if !(lo > 0.0 && lo < hi) {
        bail!("window needs 0 < lo < hi, got {lo}:{hi}");
    }
    Ok((lo, hi))
}

fn verdict(report: &RunReport) -> ExitCode {
    if report.certified() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(NOT_CERTIFIED)
    }
}

fn print_summary(report: &RunReport) {
    for [check, subject, value, status, detail] in report_rows(report) {
        let line = [check, subject, value, status, detail]
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("  ");
        println!("{line}");
    }
}
