//! Named verification experiments with strict configuration and
//! reproducible report output.

mod config;
mod experiments;
mod report;

use std::path::Path;
use std::time::Instant;

pub use config::{
    validate_config, BallConfig, ExperimentConfig, GeometryConfig, StartConfig, StepConfig,
};
pub use experiments::radial_exit_time;
pub use report::{num, Entry, EntryKind, Relation, Report, Table, Verdict};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    ExitVanishing,
    ShellExit,
    Redistribution,
    HittingCompare,
    ResolventCheck,
    BarrierCheck,
    SkeletonConsistency,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::ExitVanishing,
        Experiment::ShellExit,
        Experiment::Redistribution,
        Experiment::HittingCompare,
        Experiment::ResolventCheck,
        Experiment::BarrierCheck,
        Experiment::SkeletonConsistency,
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::UnknownExperiment(name.into()))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ExitVanishing => "exit-vanishing",
            Experiment::ShellExit => "shell-exit",
            Experiment::Redistribution => "redistribution",
            Experiment::HittingCompare => "hitting-compare",
            Experiment::ResolventCheck => "resolvent-check",
            Experiment::BarrierCheck => "barrier-check",
            Experiment::SkeletonConsistency => "skeleton-consistency",
        }
    }

    fn needs_target(&self) -> bool {
        matches!(
            self,
            Experiment::HittingCompare | Experiment::SkeletonConsistency
        )
    }

    fn uses_field(&self) -> bool {
        !matches!(
            self,
            Experiment::ResolventCheck | Experiment::HittingCompare
        )
    }

    fn needs_eps(&self) -> bool {
        matches!(
            self,
            Experiment::ExitVanishing
                | Experiment::ShellExit
                | Experiment::Redistribution
                | Experiment::BarrierCheck
        )
    }

    fn needs_delta(&self) -> bool {
        matches!(
            self,
            Experiment::ShellExit
                | Experiment::Redistribution
                | Experiment::BarrierCheck
                | Experiment::SkeletonConsistency
        )
    }

    fn needs_grid(&self) -> bool {
        matches!(
            self,
            Experiment::HittingCompare | Experiment::ResolventCheck
        )
    }

    fn is_monte_carlo(&self) -> bool {
        matches!(
            self,
            Experiment::ExitVanishing
                | Experiment::ShellExit
                | Experiment::Redistribution
                | Experiment::SkeletonConsistency
        )
    }
}

/// Validates `cfg` and runs `experiment` without touching the file system.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<Report> {
    let violations = validate_config(experiment, cfg);
    if !violations.is_empty() {
        return Err(Error::Config(violations.join("; ")));
    }
    let start = Instant::now();
    let mut report = Report::new(experiment.name(), cfg);
    match cfg.dimension() {
        Some(1) => experiments::dispatch::<1>(experiment, cfg, &mut report)?,
        _ => experiments::dispatch::<2>(experiment, cfg, &mut report)?,
    }
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs the named experiment and writes its report under `cfg.output_dir`.
pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<Report> {
    let experiment = Experiment::from_name(name)?;
    let mut report = run(experiment, cfg)?;
    report.write(Path::new(&cfg.output_dir))?;
    Ok(report)
}
