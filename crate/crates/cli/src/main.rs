use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dstep_cli::experiments::{self, SweepConfig, SweepReport};
use dstep_cli::tracefile;
use dstep_cli::{CliError, ExperimentConfig, Result};
use dstep_core::analysis::VerifyReport;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "dstep",
    version,
    about = "d-step-ahead adaptive control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the final time step.
    #[arg(long)]
    horizon: Option<i64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop experiment and write trace.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check a trace against every applicable invariant.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rerun the published time-varying example and summarise tracking.
    ReproExample {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep random plants from a coefficient box.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the homogeneous convolution bound and test it on held-out runs.
    FitBound {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn print_report(rep: &VerifyReport) {
    for c in &rep.checks {
        let note = if c.note.is_empty() {
            String::new()
        } else {
            format!("  ({})", c.note)
        };
        println!(
            "{:<4}  {:<22} worst_slack={:<12.4e} checked={}{}",
            c.status, c.name, c.worst_slack, c.checked, note
        );
    }
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn sweep(
    config: Option<PathBuf>,
    default: SweepConfig,
    workers: Option<usize>,
    common: &Common,
    file: &str,
) -> Result<SweepReport> {
    let mut cfg = match config {
        Some(p) => SweepConfig::load(p)?,
        None => default,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(h) = common.horizon {
        cfg.horizon = h;
    }
    let report = experiments::run_sweep(&cfg, workers)?;
    let dir = out_dir(&common.out)?;
    write_json(&dir.join(file), &report)?;
    let a = &report.aggregate;
    println!(
        "plants={} excluded={} lambda_under={:.6} max_norms=[{:.6}, {:.6}, {:.6}] verify_failures={}",
        a.plants, a.excluded, a.lambda_under, a.max_norms[0], a.max_norms[1], a.max_norms[2], a.verify_failures
    );
    if let (Some(l), Some(v)) = (a.max_lambda_hat, a.holdout_violations) {
        println!("max lambda_hat={l:.6} held-out violations={v}");
    }
    if let Some(p) = &a.pooled_fit {
        println!(
            "pooled fit: lambda={:.6} c={:.6} held-out violations={}",
            p.lambda,
            p.c,
            a.pooled_holdout_violations.unwrap_or(0)
        );
    }
    Ok(report)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, common } => {
            let cfg = ExperimentConfig::load(&config)?.with_overrides(common.seed, common.horizon);
            let (resolved, trace) = experiments::simulate(&cfg)?;
            let dir = out_dir(&common.out)?;
            tracefile::save_trace(&trace, dir.join("trace.csv"))?;
            resolved.config.save(dir.join("config.json"))?;
            println!(
                "wrote {} rows to {}",
                trace.records().len(),
                dir.join("trace.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            config,
            trace,
            common,
        } => {
            let cfg = ExperimentConfig::load(&config)?.with_overrides(common.seed, common.horizon);
            let resolved = cfg.resolve()?;
            let p = &resolved.sim.plant;
            let tr = tracefile::load_trace(
                &trace,
                (p.n(), p.m(), p.d()),
                resolved.sim.x0.clone(),
                resolved.sim.estimator.theta0().clone(),
            )?;
            let rep = experiments::verify(&resolved, &tr)?;
            print_report(&rep);
            let dir = out_dir(&common.out)?;
            write_json(&dir.join("verify.json"), &rep)?;
            Ok(status(rep.passed()))
        }
        Command::ReproExample { common } => {
            let (resolved, trace, summary) = experiments::repro_example()?;
            let dir = out_dir(&common.out)?;
            tracefile::save_trace(&trace, dir.join("trace.csv"))?;
            resolved.config.save(dir.join("config.json"))?;
            write_json(&dir.join("summary.json"), &summary)?;
            for w in &summary.windows {
                println!(
                    "RMS eps over [{}, {}] ({}): {:.6e}",
                    w.first, w.last, w.label, w.rms
                );
            }
            println!(
                "degrades={} recovers={} in_box={}",
                summary.degrades_under_disturbance,
                summary.recovers_after_disturbance,
                summary.estimates_in_box
            );
            print_report(&summary.verify);
            Ok(status(summary.passed()))
        }
        Command::Sweep {
            config,
            workers,
            common,
        } => {
            let rep = sweep(
                config,
                SweepConfig::example(),
                workers,
                &common,
                "sweep.json",
            )?;
            Ok(status(rep.passed()))
        }
        Command::FitBound {
            config,
            workers,
            common,
        } => {
            let rep = sweep(
                config,
                SweepConfig::fit_bound_example(),
                workers,
                &common,
                "fit_bound.json",
            )?;
            Ok(status(rep.passed()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
