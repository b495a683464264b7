use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pocketlab_core::lab::{run_experiment, ExperimentConfig};
use pocketlab_core::Error;

/// Runs a named verification experiment and writes its report.
#[derive(Debug, Parser)]
#[command(name = "lab", version)]
struct Cli {
    /// exit-vanishing, shell-exit, redistribution, hitting-compare,
    /// resolvent-check, barrier-check or skeleton-consistency
    experiment: String,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output root (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

fn usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::UnknownExperiment(_) | Error::Json(_)
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.paths {
        cfg.paths = p;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    match run_experiment(&cli.experiment, &cfg) {
        Ok(report) => {
            for v in &report.verdicts {
                println!("{}", v.line());
            }
            if let Some(dir) = &report.output {
                println!("report: {}", dir.display());
            }
            println!("wall clock: {:.1} s", report.wall_clock_seconds);
            ExitCode::from(if report.passed() { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if usage_error(&e) { 2 } else { 1 })
        }
    }
}
