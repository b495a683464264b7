//! Experiment configuration: strict JSON with validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, Geometry};
use crate::limit_walk::{QuotientPoint, SkeletonConfig};
use crate::point::Point;
use crate::sde::SdeConfig;

use super::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub pockets: Vec<BallConfig>,
    #[serde(default)]
    pub target: Option<BallConfig>,
}

/// Starting state: a torus point or a collapsed pocket (its center for the
/// diffusion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartConfig {
    Point(Vec<f64>),
    Collapsed(usize),
}

/// Time-stepping parameters. Omitted `dt0` follows the reference default for
/// the `ε` in use; omitted `eta_rel` disables refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    #[serde(default)]
    pub dt0: Option<f64>,
    #[serde(default = "default_eta")]
    pub eta_drift: f64,
    #[serde(default = "default_eta")]
    pub eta_diff: f64,
    #[serde(default)]
    pub eta_rel: Option<f64>,
    #[serde(default)]
    pub step_floor: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

fn default_eta() -> f64 {
    2e-3
}
fn default_t_max() -> f64 {
    50.0
}
fn default_paths() -> usize {
    1000
}
fn default_workers() -> usize {
    1
}
fn default_bins() -> usize {
    16
}
fn default_samples() -> usize {
    1000
}
fn default_one() -> f64 {
    1.0
}
fn default_output() -> String {
    "out".into()
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt0: None,
            eta_drift: default_eta(),
            eta_diff: default_eta(),
            eta_rel: None,
            step_floor: 0.0,
            t_max: default_t_max(),
        }
    }
}

impl StepConfig {
    pub fn sde(&self, eps: f64, seed: u64) -> SdeConfig {
        let base = SdeConfig::new(eps);
        SdeConfig {
            eps,
            dt0: self.dt0.unwrap_or(base.dt0),
            eta_drift: self.eta_drift,
            eta_diff: self.eta_diff,
            eta_rel: self.eta_rel.unwrap_or(f64::INFINITY),
            step_floor: self.step_floor,
            t_max: self.t_max,
            seed,
        }
    }

    pub fn skeleton(&self, delta: f64, seed: u64, stickiness: f64) -> SkeletonConfig {
        let base = SkeletonConfig::new(delta);
        SkeletonConfig {
            dt0: self.dt0.unwrap_or(base.dt0),
            eta_rel: self.eta_rel.unwrap_or(f64::INFINITY),
            step_floor: self.step_floor,
            stickiness,
            t_max: self.t_max,
            seed,
            ..base
        }
    }
}

/// One experiment run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Diffusion paths for the reference side of the skeleton comparison.
    #[serde(default)]
    pub reference_paths: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Grid resolutions (nodes per unit length).
    #[serde(default)]
    pub grid: Vec<usize>,
    #[serde(default)]
    pub starts: Vec<StartConfig>,
    #[serde(default)]
    pub sde: StepConfig,
    /// Stepping of the skeleton's Brownian segments; defaults to `sde`.
    #[serde(default)]
    pub skeleton: Option<StepConfig>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub lambda: Vec<f64>,
    /// Barrier sample points, or random sources for the resolvent check.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Multiplier on the pocket volume in the flux condition and on the
    /// skeleton holding time.
    #[serde(default = "default_one")]
    pub stickiness: f64,
    #[serde(default = "default_output")]
    pub output_dir: String,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn dimension(&self) -> Option<usize> {
        let g = &self.geometry;
        let mut dims = g.pockets.iter().chain(&g.target).map(|b| b.center.len());
        let d = dims.next()?;
        dims.all(|e| e == d).then_some(d)
    }

    pub fn skeleton_steps(&self) -> &StepConfig {
        self.skeleton.as_ref().unwrap_or(&self.sde)
    }

    pub fn geometry<const D: usize>(&self) -> Result<Geometry<D>> {
        let ball = |b: &BallConfig| -> Result<Ball<D>> {
            Ok(Ball::new(point_of::<D>(&b.center, "geometry")?, b.radius))
        };
        let pockets = self
            .geometry
            .pockets
            .iter()
            .map(ball)
            .collect::<Result<_>>()?;
        let target = self.geometry.target.as_ref().map(ball).transpose()?;
        Geometry::new(pockets, target)
    }

    pub fn start<const D: usize>(&self, i: usize) -> Result<QuotientPoint<D>> {
        match self.starts.get(i) {
            Some(StartConfig::Point(p)) => Ok(QuotientPoint::Free(point_of::<D>(p, "starts")?)),
            Some(StartConfig::Collapsed(k)) => Ok(QuotientPoint::Collapsed(*k)),
            None => Err(Error::Config(format!("starts[{i}] is missing"))),
        }
    }

    /// Position of a start for the diffusion (a collapsed start sits at the
    /// pocket center).
    pub fn start_point<const D: usize>(
        &self,
        geometry: &Geometry<D>,
        i: usize,
    ) -> Result<Point<D>> {
        match self.start::<D>(i)? {
            QuotientPoint::Free(p) => Ok(p),
            QuotientPoint::Collapsed(k) => Ok(geometry.pocket(k).center()),
        }
    }
}

fn point_of<const D: usize>(v: &[f64], field: &str) -> Result<Point<D>> {
    v.try_into().map_err(|_| {
        Error::Config(format!(
            "{field}: expected {D} coordinates, got {}",
            v.len()
        ))
    })
}

/// Every violated constraint, each naming its field. Empty iff the
/// configuration is admissible for `experiment`.
pub fn validate_config(experiment: Experiment, cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(name) = &cfg.experiment {
        if name != experiment.name() {
            out.push(format!(
                "experiment: config is for `{name}`, not `{}`",
                experiment.name()
            ));
        }
    }
    let Some(d) = cfg.dimension() else {
        out.push("geometry: needs at least one ball, all of one dimension".into());
        return out;
    };
    if !(1..=2).contains(&d) {
        out.push(format!("geometry: dimension {d} is not supported (1 or 2)"));
        return out;
    }
    let radius_ok = cfg
        .geometry
        .pockets
        .iter()
        .chain(&cfg.geometry.target)
        .all(|b| b.radius.is_finite() && b.center.iter().all(|c| c.is_finite()));
    if !radius_ok {
        out.push("geometry: coordinates and radii must be finite".into());
        return out;
    }
    match d {
        1 => check_geometry::<1>(experiment, cfg, &mut out),
        _ => check_geometry::<2>(experiment, cfg, &mut out),
    }

    let n_pockets = cfg.geometry.pockets.len();
    if n_pockets == 0 {
        out.push("geometry.pockets: at least one pocket is required".into());
    }
    if experiment.needs_target() && cfg.geometry.target.is_none() {
        out.push("geometry.target: this experiment needs a target domain F".into());
    }
    // The 1D skeleton check compares against the exact solution only.
    let field_free = experiment == Experiment::SkeletonConsistency && d == 1;
    if experiment.uses_field() && !field_free {
        if cfg.amplitudes.len() != n_pockets {
            out.push(format!(
                "amplitudes: expected {n_pockets} values, got {}",
                cfg.amplitudes.len()
            ));
        }
        for (i, a) in cfg.amplitudes.iter().enumerate() {
            if !(*a > 0.0 && a.is_finite()) {
                out.push(format!("amplitudes[{i}]: must be positive"));
            }
        }
    }
    if experiment.needs_eps() && cfg.eps.is_empty() {
        out.push("eps: at least one value is required".into());
    }
    for (i, e) in cfg.eps.iter().enumerate() {
        if !(*e > 0.0 && e.is_finite()) {
            out.push(format!("eps[{i}]: must be positive"));
        }
    }
    if experiment == Experiment::ExitVanishing {
        if cfg.eps.len() < 2 {
            out.push("eps: needs at least two values".into());
        }
        if cfg.eps.windows(2).any(|w| w[1] >= w[0]) {
            out.push("eps: must be strictly decreasing".into());
        }
    }
    if experiment.needs_delta() && cfg.delta.is_empty() {
        out.push("delta: at least one value is required".into());
    }
    if experiment.needs_grid() && cfg.grid.is_empty() {
        out.push("grid: at least one resolution is required".into());
    }
    for (i, n) in cfg.grid.iter().enumerate() {
        if *n < 8 {
            out.push(format!("grid[{i}]: needs at least 8 nodes"));
        }
    }
    if experiment.is_monte_carlo() && cfg.paths < 100 {
        out.push(format!("paths: need at least 100 (got {})", cfg.paths));
    }
    if cfg.reference_paths.is_some_and(|p| p < 100) {
        out.push("reference_paths: need at least 100".into());
    }
    if cfg.workers == 0 {
        out.push("workers: must be at least 1".into());
    }
    if cfg.bins == 0 {
        out.push("bins: must be at least 1".into());
    }
    if cfg.samples == 0 {
        out.push("samples: must be at least 1".into());
    }
    if !(cfg.stickiness > 0.0 && cfg.stickiness.is_finite()) {
        out.push("stickiness: must be positive".into());
    }
    for (i, l) in cfg.lambda.iter().enumerate() {
        if !(*l > 0.0 && l.is_finite()) {
            out.push(format!("lambda[{i}]: must be positive"));
        }
    }
    if experiment == Experiment::Redistribution && cfg.starts.len() < 2 {
        out.push("starts: redistribution needs two starting points".into());
    }
    for (i, s) in cfg.starts.iter().enumerate() {
        match s {
            StartConfig::Point(p) if p.len() != d => out.push(format!(
                "starts[{i}]: expected {d} coordinates, got {}",
                p.len()
            )),
            StartConfig::Point(p) if p.iter().any(|c| !c.is_finite()) => {
                out.push(format!("starts[{i}]: coordinates must be finite"))
            }
            StartConfig::Collapsed(k) if *k >= n_pockets => {
                out.push(format!("starts[{i}]: no pocket {k}"))
            }
            _ => {}
        }
    }
    for (name, steps) in [("sde", Some(&cfg.sde)), ("skeleton", cfg.skeleton.as_ref())] {
        let Some(s) = steps else { continue };
        let probe = s.sde(cfg.eps.first().copied().unwrap_or(1.0), cfg.seed);
        if let Err(e) = probe.validate() {
            out.push(format!("{name}: {e}"));
        }
    }
    out
}

fn check_geometry<const D: usize>(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    out: &mut Vec<String>,
) {
    let balls: Vec<Ball<D>> = cfg
        .geometry
        .pockets
        .iter()
        .map(|b| Ball::new(b.center.as_slice().try_into().unwrap(), b.radius))
        .collect();
    let target = cfg
        .geometry
        .target
        .as_ref()
        .map(|b| Ball::new(b.center.as_slice().try_into().unwrap(), b.radius));
    let bad = Geometry::violations(&balls, target.as_ref());
    if !bad.is_empty() {
        out.extend(bad.into_iter().map(|v| format!("geometry: {v}")));
        return;
    }
    let geometry = Geometry::new(balls, target).expect("validated above");
    let bound = geometry.max_delta();
    for (i, d) in cfg.delta.iter().enumerate() {
        if !(*d > 0.0) {
            out.push(format!("delta[{i}]: must be positive"));
        } else if *d >= bound {
            out.push(format!(
                "delta[{i}]: delta too large ({d} >= bound {bound})"
            ));
        }
    }
    if experiment == Experiment::ResolventCheck || experiment == Experiment::HittingCompare {
        for (i, n) in cfg.grid.iter().enumerate() {
            let dx = 1.0 / *n as f64;
            if geometry.pockets().iter().any(|p| p.radius() < 2.0 * dx) {
                out.push(format!(
                    "grid[{i}]: pockets must span at least two grid cells"
                ));
            }
        }
    }
}
