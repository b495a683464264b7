//! Euler–Maruyama simulation of the pocket diffusion and its Monte-Carlo estimators.
//!
//! The generator `½Δ + (2ε)⁻¹∇·(a∇)` expands to `½(1 + a/ε)Δ + (2ε)⁻¹⟨∇a, ∇⟩`,
//! so the process solves the Itô equation
//!
//! ```text
//! dX = ∇a(X)/(2ε) dt + √(1 + a(X)/ε) dW
//! ```
//!
//! on the torus. Steps shrink where the coefficient is large and, optionally,
//! near tracked surfaces; a surface crossing inside a step is located on the
//! straight step segment and the exit point is placed on the surface.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusivity::{DiffusivityField, LocalCoefficient};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Geometry, NearestPocket, RegionTag};
use crate::parallel::{map_paths, mean_stderr};
use crate::point::{self, Point};

/// Distance below which a start point counts as lying on a target surface.
pub const ON_SURFACE_TOL: f64 = 1e-12;

/// Step-size and stopping parameters of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub eps: f64,
    /// Base step; the step used away from pockets and surfaces.
    pub dt0: f64,
    /// Largest drift displacement per step.
    pub eta_drift: f64,
    /// Largest diffusion length per step inside pockets.
    pub eta_diff: f64,
    /// Relative refinement factor of [`local_dt`](Self::local_dt); `∞` disables it.
    pub eta_rel: f64,
    /// Smallest diffusion length per step near a tracked surface.
    pub step_floor: f64,
    pub t_max: f64,
    pub seed: u64,
}

impl SdeConfig {
    /// Reference defaults: `dt0 = 1e-5` (`1e-6` once `ε <= 1e-5`),
    /// `η_drift = η_diff = 2e-3`, `t_max = 50`, no refinement.
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            dt0: if eps <= 1e-5 { 1e-6 } else { 1e-5 },
            eta_drift: 2e-3,
            eta_diff: 2e-3,
            eta_rel: f64::INFINITY,
            step_floor: 0.0,
            t_max: 50.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps", self.eps),
            ("dt0", self.dt0),
            ("eta_drift", self.eta_drift),
            ("eta_diff", self.eta_diff),
            ("eta_rel", self.eta_rel),
            ("t_max", self.t_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive (got {v})")));
            }
        }
        if !(self.step_floor >= 0.0 && self.step_floor.is_finite()) {
            return Err(Error::Config("step_floor must be finite and >= 0".into()));
        }
        if self.eta_rel.is_finite() && self.step_floor == 0.0 {
            return Err(Error::Config(
                "refinement (finite eta_rel) needs a positive step_floor".into(),
            ));
        }
        Ok(())
    }

    /// `min(dt0, η_drift·2ε/|∇a|, η_diff²/(1 + a/ε))`; the coefficient terms
    /// are inactive where `a = 0`, so the step is `dt0` on `U`.
    #[inline]
    pub fn base_dt<const D: usize>(&self, loc: &LocalCoefficient<D>) -> f64 {
        let mut dt = self.dt0;
        if loc.a > 0.0 {
            let g = point::norm(&loc.grad);
            if g > 0.0 {
                dt = dt.min(self.eta_drift * 2.0 * self.eps / g);
            }
            dt = dt.min(self.eta_diff * self.eta_diff / (1.0 + loc.a / self.eps));
        }
        dt
    }

    /// [`base_dt`](Self::base_dt) with refinement. The diffusion length per
    /// step is capped by `η_rel·√((ε + a)/ψ)` inside a pocket, by
    /// `η_rel·(dist + √(ε/ψ))` on `U` at distance `dist` from the nearest pocket,
    /// and by `max(η_rel·surface_dist, step_floor)` near a tracked surface.
    #[inline]
    pub fn local_dt<const D: usize>(
        &self,
        field: &DiffusivityField<D>,
        loc: &LocalCoefficient<D>,
        surface_dist: f64,
    ) -> f64 {
        let dt = self.base_dt(loc);
        if !self.eta_rel.is_finite() {
            return dt;
        }
        let mut len = (self.eta_rel * surface_dist).max(self.step_floor);
        if let Some(near) = loc.nearest {
            let psi = field.psi(near.pocket);
            if psi > 0.0 {
                let scale = if loc.a > 0.0 {
                    ((self.eps + loc.a) / psi).sqrt()
                } else {
                    near.distance + (self.eps / psi).sqrt()
                };
                len = len.min(self.eta_rel * scale);
            }
        }
        dt.min(len * len / (1.0 + loc.a / self.eps))
    }
}

/// Step size at `x` under the base rule.
pub fn adaptive_dt<const D: usize>(
    field: &DiffusivityField<D>,
    x: &Point<D>,
    cfg: &SdeConfig,
) -> f64 {
    cfg.base_dt(&field.local(x))
}

/// One Euler–Maruyama step with standard normal increment `xi`, wrapped to the torus.
pub fn sde_step<const D: usize>(
    field: &DiffusivityField<D>,
    eps: f64,
    x: &Point<D>,
    dt: f64,
    xi: &Point<D>,
) -> Point<D> {
    let loc = field.local(x);
    point::wrap(&point::add(x, &increment(&loc, eps, dt, xi)))
}

#[inline]
fn increment<const D: usize>(
    loc: &LocalCoefficient<D>,
    eps: f64,
    dt: f64,
    xi: &Point<D>,
) -> Point<D> {
    let sigma = ((1.0 + loc.a / eps) * dt).sqrt();
    let drift = dt / (2.0 * eps);
    std::array::from_fn(|i| loc.grad[i] * drift + sigma * xi[i])
}

/// A stopping surface: a sphere, or a closed ball when `solid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surface<const D: usize> {
    pub center: Point<D>,
    pub radius: f64,
    pub solid: bool,
}

impl<const D: usize> Surface<D> {
    pub fn sphere(ball: &Ball<D>) -> Self {
        Self {
            center: ball.center,
            radius: ball.radius,
            solid: false,
        }
    }

    pub fn solid(ball: &Ball<D>) -> Self {
        Self {
            center: ball.center,
            radius: ball.radius,
            solid: true,
        }
    }

    /// Signed distance, negative inside.
    #[inline]
    pub fn value(&self, x: &Point<D>) -> f64 {
        point::torus_dist(x, &self.center) - self.radius
    }

    /// First parameter `s ∈ [0, 1]` where the segment `v0 + s·d` (offsets
    /// from the center) meets the sphere.
    fn crossing(&self, v0: &Point<D>, d: &Point<D>) -> f64 {
        let a = point::dot(d, d);
        let b = 2.0 * point::dot(v0, d);
        let c = point::dot(v0, v0) - self.radius * self.radius;
        if a == 0.0 {
            return 0.0;
        }
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        // Numerically stable pair of roots.
        let q = -0.5 * (b + b.signum() * disc);
        let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (0.0, 0.0) };
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        if (0.0..=1.0).contains(&lo) {
            lo
        } else if (0.0..=1.0).contains(&hi) {
            hi
        } else {
            lo.clamp(0.0, 1.0).max(hi.clamp(0.0, 1.0))
        }
    }

    /// Point of the sphere radially above the offset `v`.
    fn snap(&self, v: &Point<D>) -> Point<D> {
        let n = point::norm(v);
        point::wrap(&point::axpy(self.radius / n, v, &self.center))
    }
}

/// Target of a first-passage run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Target {
    /// `∂D_k`.
    PocketBoundary { pocket: usize },
    /// `∂D^{+δ}_k`.
    OuterShell { pocket: usize, delta: f64 },
    /// `∂D^{-δ}_k`.
    InnerShell { pocket: usize, delta: f64 },
    /// `∂F`.
    TargetBoundary,
    /// `F̄`.
    TargetClosure,
}

impl Target {
    pub fn surface<const D: usize>(&self, geometry: &Geometry<D>) -> Result<Surface<D>> {
        let pocket_ball = |k: usize| {
            geometry
                .pockets()
                .get(k)
                .map(|p| p.ball)
                .ok_or_else(|| Error::Config(format!("target names missing pocket {k}")))
        };
        let target_ball = || {
            geometry
                .target()
                .copied()
                .ok_or_else(|| Error::Config("target domain F is not defined".into()))
        };
        Ok(match *self {
            Target::PocketBoundary { pocket } => Surface::sphere(&pocket_ball(pocket)?),
            Target::OuterShell { pocket, delta } => {
                geometry.check_delta(delta)?;
                let b = pocket_ball(pocket)?;
                Surface::sphere(&Ball::new(b.center, b.radius + delta))
            }
            Target::InnerShell { pocket, delta } => {
                geometry.check_delta(delta)?;
                let b = pocket_ball(pocket)?;
                Surface::sphere(&Ball::new(b.center, b.radius - delta))
            }
            Target::TargetBoundary => Surface::sphere(&target_ball()?),
            Target::TargetClosure => Surface::solid(&target_ball()?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Hit,
    Timeout,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Hit => "hit",
            Status::Timeout => "timeout",
        }
    }
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome<const D: usize> {
    pub path_id: u64,
    /// Stopping time: hitting time, or the time limit on timeout.
    pub tau: f64,
    /// Exit point on the hit surface, or the final position on timeout.
    pub exit: Point<D>,
    pub status: Status,
    /// Index of the surface that was hit.
    pub surface: Option<usize>,
    /// Completed `∂D → ∂D^{+δ} → ∂D` cycles (0 without tracking).
    pub excursions: u64,
    /// Time per occupation column (empty without tracking).
    pub occupation: Vec<f64>,
    pub steps: u64,
}

/// Column names of the occupation vector: `deep_u`, then per pocket
/// `shell_k, boundary_k, pocket_k, inner_k`, then `target_f`.
pub fn occupation_columns(n_pockets: usize) -> Vec<String> {
    let mut cols = vec!["deep_u".to_string()];
    for k in 0..n_pockets {
        for name in ["shell", "boundary", "pocket", "inner"] {
            cols.push(format!("{name}_{k}"));
        }
    }
    cols.push("target_f".into());
    cols
}

pub fn occupation_index(tag: RegionTag, n_pockets: usize) -> usize {
    match tag {
        RegionTag::DeepU => 0,
        RegionTag::Shell(k) => 1 + 4 * k,
        RegionTag::Boundary(k) => 2 + 4 * k,
        RegionTag::Pocket(k) => 3 + 4 * k,
        RegionTag::Inner(k) => 4 + 4 * k,
        RegionTag::TargetF => 1 + 4 * n_pockets,
    }
}

struct Excursions {
    delta: f64,
    hits: u64,
    seeking_shell: Option<usize>,
}

impl Excursions {
    #[inline]
    fn update<const D: usize>(
        &mut self,
        geometry: &Geometry<D>,
        x: &Point<D>,
        near: Option<&NearestPocket<D>>,
    ) {
        match self.seeking_shell {
            None => {
                if let Some(n) = near {
                    if n.inside || n.distance == 0.0 {
                        self.hits += 1;
                        self.seeking_shell = Some(n.pocket);
                    }
                }
            }
            Some(k) => {
                if geometry.pocket(k).ball.signed_distance(x) >= self.delta {
                    self.seeking_shell = None;
                }
            }
        }
    }

    fn completed(&self) -> u64 {
        self.hits.saturating_sub(1)
    }
}

/// Simulates one path from `x0` until it first reaches one of `surfaces` or
/// `cfg.t_max` elapses. With `delta` set, region occupation times and the
/// excursion count are tracked. `observe(t, x)` sees every completed step
/// except the final, surface-hitting one.
#[allow(clippy::too_many_arguments)]
pub fn run_path_observed<const D: usize, R, O>(
    field: &DiffusivityField<D>,
    x0: &Point<D>,
    surfaces: &[Surface<D>],
    cfg: &SdeConfig,
    delta: Option<f64>,
    rng: &mut R,
    mut observe: O,
) -> TrajectoryOutcome<D>
where
    R: Rng + ?Sized,
    O: FnMut(f64, &Point<D>),
{
    let geometry = field.geometry();
    let n_pockets = geometry.pockets().len();
    let mut x = point::wrap(x0);
    let mut occupation = if delta.is_some() {
        vec![0.0; 2 + 4 * n_pockets]
    } else {
        Vec::new()
    };
    let mut excursions = delta.map(|delta| Excursions {
        delta,
        hits: 0,
        seeking_shell: None,
    });
    let outcome = |tau, exit, status, surface, occupation, exc: Option<Excursions>, steps| {
        TrajectoryOutcome {
            path_id: 0,
            tau,
            exit,
            status,
            surface,
            excursions: exc.map_or(0, |e| e.completed()),
            occupation,
            steps,
        }
    };

    let mut signs = Vec::with_capacity(surfaces.len());
    for (i, s) in surfaces.iter().enumerate() {
        let g = s.value(&x);
        if (s.solid && g <= ON_SURFACE_TOL) || g.abs() <= ON_SURFACE_TOL {
            return outcome(0.0, x, Status::Hit, Some(i), occupation, excursions, 0);
        }
        signs.push(g.signum());
    }

    let eps = cfg.eps;
    let mut t = 0.0;
    let mut steps = 0u64;
    loop {
        let remaining = cfg.t_max - t;
        if remaining <= 1e-15 * cfg.t_max {
            return outcome(
                cfg.t_max,
                x,
                Status::Timeout,
                None,
                occupation,
                excursions,
                steps,
            );
        }
        let loc = field.local(&x);
        if let Some(exc) = excursions.as_mut() {
            exc.update(geometry, &x, loc.nearest.as_ref());
        }
        let mut dist = f64::INFINITY;
        for s in surfaces {
            dist = dist.min(s.value(&x).abs());
        }
        let full_dt = cfg.local_dt(field, &loc, dist);
        let dt = full_dt.min(remaining);
        let xi: Point<D> = std::array::from_fn(|_| rng.sample(StandardNormal));
        let dx = increment(&loc, eps, dt, &xi);
        steps += 1;

        let mut hit: Option<(usize, f64, Point<D>)> = None;
        for (i, s) in surfaces.iter().enumerate() {
            let v0 = point::min_image(&x, &s.center);
            let v1 = point::add(&v0, &dx);
            let g1 = point::norm(&v1) - s.radius;
            if g1 * signs[i] <= 0.0 {
                let frac = s.crossing(&v0, &dx);
                if hit.is_none_or(|(_, best, _)| frac < best) {
                    let v = point::axpy(frac, &dx, &v0);
                    hit = Some((i, frac, s.snap(&v)));
                }
            }
        }

        let region_dt = match hit {
            Some((_, frac, _)) => frac * dt,
            None => dt,
        };
        if let Some(delta) = delta {
            let tag = geometry.region_of(&x, loc.nearest.as_ref(), delta);
            occupation[occupation_index(tag, n_pockets)] += region_dt;
        }
        if let Some((i, frac, exit)) = hit {
            let tau = t + frac * dt;
            return outcome(
                tau,
                exit,
                Status::Hit,
                Some(i),
                occupation,
                excursions,
                steps,
            );
        }
        t += dt;
        x = point::wrap(&point::add(&x, &dx));
        observe(t, &x);
    }
}

/// [`run_path_observed`] without an observer.
pub fn run_path<const D: usize, R: Rng + ?Sized>(
    field: &DiffusivityField<D>,
    x0: &Point<D>,
    surfaces: &[Surface<D>],
    cfg: &SdeConfig,
    delta: Option<f64>,
    rng: &mut R,
) -> TrajectoryOutcome<D> {
    run_path_observed(field, x0, surfaces, cfg, delta, rng, |_, _| {})
}

/// First passage from `x0` to `target`.
pub fn run_to_target<const D: usize, R: Rng + ?Sized>(
    field: &DiffusivityField<D>,
    x0: &Point<D>,
    target: &Target,
    cfg: &SdeConfig,
    rng: &mut R,
) -> Result<TrajectoryOutcome<D>> {
    cfg.validate()?;
    let s = target.surface(field.geometry())?;
    Ok(run_path(field, x0, &[s], cfg, None, rng))
}

/// Monte-Carlo exit-time estimate together with the raw paths.
#[derive(Debug, Clone)]
pub struct ExitTimeEstimate<const D: usize> {
    pub mean: f64,
    pub stderr: f64,
    pub hits: usize,
    pub timeouts: usize,
    pub outcomes: Vec<TrajectoryOutcome<D>>,
}

impl<const D: usize> ExitTimeEstimate<D> {
    fn from_outcomes(outcomes: Vec<TrajectoryOutcome<D>>) -> Result<Self> {
        let taus: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.status == Status::Hit)
            .map(|o| o.tau)
            .collect();
        let timeouts = outcomes.len() - taus.len();
        if timeouts * 100 > outcomes.len() {
            return Err(Error::TimeoutDominated {
                timeouts,
                paths: outcomes.len(),
            });
        }
        let (mean, stderr) = mean_stderr(&taus);
        Ok(Self {
            mean,
            stderr,
            hits: taus.len(),
            timeouts,
            outcomes,
        })
    }

    pub fn mean_excursions(&self) -> (f64, f64) {
        let n: Vec<f64> = self.outcomes.iter().map(|o| o.excursions as f64).collect();
        mean_stderr(&n)
    }
}

/// Independent paths `0..n_paths` from `x0`, run in parallel and returned in path order.
#[allow(clippy::too_many_arguments)]
pub fn simulate_paths<const D: usize>(
    field: &DiffusivityField<D>,
    x0: &Point<D>,
    surfaces: &[Surface<D>],
    cfg: &SdeConfig,
    delta: Option<f64>,
    n_paths: usize,
    workers: usize,
) -> Result<Vec<TrajectoryOutcome<D>>> {
    cfg.validate()?;
    map_paths(n_paths, cfg.seed, workers, |id, rng| {
        let mut o = run_path(field, x0, surfaces, cfg, delta, rng);
        o.path_id = id;
        o
    })
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 100 {
        return Err(Error::Domain(format!(
            "Monte-Carlo estimates need at least 100 paths (got {n_paths})"
        )));
    }
    Ok(())
}

/// Mean first-passage time from `x0` to `target`. With `delta` set, the
/// paths also carry occupation times and excursion counts.
#[allow(clippy::too_many_arguments)]
pub fn mc_exit_time<const D: usize>(
    field: &DiffusivityField<D>,
    x0: &Point<D>,
    target: &Target,
    cfg: &SdeConfig,
    n_paths: usize,
    workers: usize,
    delta: Option<f64>,
) -> Result<ExitTimeEstimate<D>> {
    check_paths(n_paths)?;
    if let Some(d) = delta {
        field.geometry().check_delta(d)?;
    }
    let s = target.surface(field.geometry())?;
    let outcomes = simulate_paths(field, x0, &[s], cfg, delta, n_paths, workers)?;
    ExitTimeEstimate::from_outcomes(outcomes)
}

/// Binned law of `θ(X_τ)` on `∂D_k` for `τ` the exit time of `D^{+δ}_k`.
#[derive(Debug, Clone)]
pub struct EmpiricalBoundaryMeasure<const D: usize> {
    pub pocket: usize,
    pub counts: Vec<u64>,
    pub masses: Vec<f64>,
    pub exit: ExitTimeEstimate<D>,
}

impl<const D: usize> EmpiricalBoundaryMeasure<D> {
    pub fn tv_to_uniform(&self) -> f64 {
        let u = 1.0 / self.masses.len() as f64;
        0.5 * self.masses.iter().map(|m| (m - u).abs()).sum::<f64>()
    }

    pub fn tv(&self, other: &Self) -> f64 {
        total_variation(&self.masses, &other.masses)
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Histogram (`bins` cells of the boundary parametrization) of the projected
/// exit points on `∂D^{+δ}_k` for paths started at `x0 ∈ ∂D_k`.
#[allow(clippy::too_many_arguments)]
pub fn mc_exit_distribution<const D: usize>(
    field: &DiffusivityField<D>,
    k: usize,
    x0: &Point<D>,
    delta: f64,
    cfg: &SdeConfig,
    n_paths: usize,
    bins: usize,
    workers: usize,
) -> Result<EmpiricalBoundaryMeasure<D>> {
    let geometry = field.geometry();
    if k >= geometry.pockets().len() {
        return Err(Error::Config(format!("no pocket {k}")));
    }
    geometry.unit_normal(k, x0)?;
    if bins == 0 {
        return Err(Error::Domain("histogram needs at least one bin".into()));
    }
    let target = Target::OuterShell { pocket: k, delta };
    let exit = mc_exit_time(field, x0, &target, cfg, n_paths, workers, Some(delta))?;
    let mut counts = vec![0u64; bins];
    for o in exit.outcomes.iter().filter(|o| o.status == Status::Hit) {
        let theta = geometry.project(&o.exit)?;
        let u = geometry.boundary_param(k, &theta);
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let total: u64 = counts.iter().sum();
    let masses = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(EmpiricalBoundaryMeasure {
        pocket: k,
        counts,
        masses,
        exit,
    })
}

/// One row of [`mc_vanishing_exit`].
#[derive(Debug, Clone)]
pub struct VanishingRow<const D: usize> {
    pub eps: f64,
    pub estimate: ExitTimeEstimate<D>,
}

/// Mean exit time from the pocket containing `x0` for each `ε` in `eps_list`
/// (strictly decreasing). Every other field of `cfg` is kept.
pub fn mc_vanishing_exit<const D: usize>(
    field: &DiffusivityField<D>,
    x0: &Point<D>,
    eps_list: &[f64],
    cfg: &SdeConfig,
    n_paths: usize,
    workers: usize,
) -> Result<Vec<VanishingRow<D>>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("ε list must be strictly decreasing".into()));
    }
    let near = field
        .geometry()
        .nearest_pocket(x0)
        .filter(|n| n.inside || n.distance == 0.0)
        .ok_or_else(|| Error::Domain("start point is not in a pocket".into()))?;
    let target = Target::PocketBoundary {
        pocket: near.pocket,
    };
    eps_list
        .iter()
        .map(|&eps| {
            let cfg = SdeConfig { eps, ..*cfg };
            let estimate = mc_exit_time(field, x0, &target, &cfg, n_paths, workers, None)?;
            Ok(VanishingRow { eps, estimate })
        })
        .collect()
}

/// Mean occupation fractions over `[0, T]`, one entry per occupation column.
#[derive(Debug, Clone)]
pub struct OccupationEstimate<const D: usize> {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub outcomes: Vec<TrajectoryOutcome<D>>,
}

impl<const D: usize> OccupationEstimate<D> {
    pub fn column(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some((self.mean[i], self.stderr[i]))
    }

    /// Mean occupation fraction of pocket `k` (`pocket_k + inner_k + boundary_k`)
    /// with its standard error.
    pub fn pocket_fraction(&self, k: usize) -> (f64, f64) {
        let idx = [2 + 4 * k, 3 + 4 * k, 4 + 4 * k];
        let xs: Vec<f64> = self
            .outcomes
            .iter()
            .map(|o| {
                let total: f64 = o.occupation.iter().sum();
                if total > 0.0 {
                    idx.iter().map(|&i| o.occupation[i]).sum::<f64>() / total
                } else {
                    0.0
                }
            })
            .collect();
        mean_stderr(&xs)
    }
}

/// Fractions of `[0, T]` spent in each region for paths from `x0`.
#[allow(clippy::too_many_arguments)]
pub fn mc_occupation<const D: usize>(
    field: &DiffusivityField<D>,
    x0: &Point<D>,
    horizon: f64,
    delta: f64,
    cfg: &SdeConfig,
    n_paths: usize,
    workers: usize,
) -> Result<OccupationEstimate<D>> {
    let geometry = field.geometry();
    geometry.check_delta(delta)?;
    if !(horizon >= 0.0) {
        return Err(Error::Domain(format!("horizon {horizon} must be >= 0")));
    }
    let n_pockets = geometry.pockets().len();
    let columns = occupation_columns(n_pockets);
    if horizon == 0.0 {
        let mut mean = vec![0.0; columns.len()];
        mean[occupation_index(geometry.classify(x0, delta)?, n_pockets)] = 1.0;
        let stderr = vec![0.0; columns.len()];
        return Ok(OccupationEstimate {
            columns,
            mean,
            stderr,
            outcomes: Vec::new(),
        });
    }
    let cfg = SdeConfig {
        t_max: horizon,
        ..*cfg
    };
    let outcomes = simulate_paths(field, x0, &[], &cfg, Some(delta), n_paths, workers)?;
    let mut mean = Vec::with_capacity(columns.len());
    let mut stderr = Vec::with_capacity(columns.len());
    for i in 0..columns.len() {
        let xs: Vec<f64> = outcomes
            .iter()
            .map(|o| {
                let total: f64 = o.occupation.iter().sum();
                o.occupation[i] / total
            })
            .collect();
        let (m, s) = mean_stderr(&xs);
        mean.push(m);
        stderr.push(s);
    }
    Ok(OccupationEstimate {
        columns,
        mean,
        stderr,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::path_rng;

    fn disk_field(amp: f64) -> DiffusivityField<2> {
        let g = Geometry::new(vec![Ball::new([0.5, 0.5], 0.15)], None).unwrap();
        DiffusivityField::new(g, vec![amp]).unwrap()
    }

    #[test]
    fn zero_noise_step_in_u_is_identity() {
        let f = disk_field(1.0);
        let x = [0.1, 0.2];
        assert_eq!(sde_step(&f, 1e-3, &x, 1e-4, &[0.0, 0.0]), x);
    }

    #[test]
    fn zero_noise_step_in_pocket_follows_drift() {
        let f = disk_field(1.0);
        let x = [0.55, 0.5];
        let g = f.eval_grad_a(&x);
        assert_eq!(g[1], 0.0);
        let (eps, dt) = (1e-3, 1e-7);
        let y = sde_step(&f, eps, &x, dt, &[0.0, 0.0]);
        assert!((y[0] - x[0] - g[0] * dt / (2.0 * eps)).abs() < 1e-15);
        assert_eq!(y[1], x[1]);
    }

    #[test]
    fn base_dt_rules() {
        let f = disk_field(1.0);
        let cfg = SdeConfig::new(1e-3);
        assert_eq!(adaptive_dt(&f, &[0.1, 0.1], &cfg), cfg.dt0);
        // a/ε = 1e4 with η_diff = 1e-3.
        let loc = LocalCoefficient::<2> {
            a: 10.0,
            grad: [0.0, 0.0],
            boundary_distance: 0.1,
            nearest: None,
        };
        let cfg = SdeConfig {
            eps: 1e-3,
            eta_diff: 1e-3,
            ..SdeConfig::new(1e-3)
        };
        assert!((cfg.base_dt(&loc) - 1e-6 / (1.0 + 1e4)).abs() < 1e-22);
        let half = SdeConfig {
            eta_diff: 5e-4,
            ..cfg
        };
        assert!((cfg.base_dt(&loc) / half.base_dt(&loc) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn start_on_target_stops_at_zero() {
        let f = disk_field(1.0);
        let mut rng = path_rng(1, 0);
        let t = Target::PocketBoundary { pocket: 0 };
        let o = run_to_target(&f, &[0.65, 0.5], &t, &SdeConfig::new(1e-3), &mut rng).unwrap();
        assert_eq!(o.tau, 0.0);
        assert_eq!(o.status, Status::Hit);
        assert_eq!(o.exit, [0.65, 0.5]);
    }

    #[test]
    fn exit_points_lie_on_surface() {
        let f = disk_field(0.1);
        let cfg = SdeConfig {
            eta_diff: 0.01,
            ..SdeConfig::new(1e-3)
        };
        let s = Target::OuterShell {
            pocket: 0,
            delta: 0.02,
        }
        .surface(f.geometry())
        .unwrap();
        for i in 0..50 {
            let mut rng = path_rng(5, i);
            let o = run_path(&f, &[0.65, 0.5], &[s], &cfg, Some(0.02), &mut rng);
            assert_eq!(o.status, Status::Hit);
            assert!(s.value(&o.exit).abs() < 1e-6);
            let total: f64 = o.occupation.iter().sum();
            assert!((total - o.tau).abs() <= 1e-12 * o.tau.max(1.0));
        }
    }

    #[test]
    fn brownian_increment_covariance() {
        let f = disk_field(1.0);
        let (dt, n) = (1e-5, 1_000_000);
        let mut rng = path_rng(11, 0);
        let x = [0.1, 0.1];
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let xi: Point<2> = std::array::from_fn(|_| rng.sample(StandardNormal));
            let y = sde_step(&f, 1e-3, &x, dt, &xi);
            let d = point::min_image(&y, &x);
            sxx += d[0] * d[0];
            syy += d[1] * d[1];
            sxy += d[0] * d[1];
        }
        let n = n as f64;
        assert!((sxx / n / dt - 1.0).abs() < 0.02);
        assert!((syy / n / dt - 1.0).abs() < 0.02);
        assert!((sxy / n / dt).abs() < 0.02);
    }

    #[test]
    fn occupation_at_zero_horizon() {
        let f = disk_field(1.0);
        let cfg = SdeConfig::new(1e-3);
        let est = mc_occupation(&f, &[0.5, 0.5], 0.0, 0.02, &cfg, 100, 1).unwrap();
        assert_eq!(est.column("inner_0"), Some((1.0, 0.0)));
        assert_eq!(est.mean.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn too_few_paths_rejected() {
        let f = disk_field(1.0);
        let t = Target::PocketBoundary { pocket: 0 };
        let r = mc_exit_time(&f, &[0.5, 0.5], &t, &SdeConfig::new(1e-3), 10, 1, None);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn missing_target_domain_is_config_error() {
        let f = disk_field(1.0);
        assert!(matches!(
            Target::TargetClosure.surface(f.geometry()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn occupation_columns_layout() {
        let cols = occupation_columns(2);
        assert_eq!(cols.len(), 10);
        assert_eq!(cols[occupation_index(RegionTag::Inner(1), 2)], "inner_1");
        assert_eq!(cols[occupation_index(RegionTag::TargetF, 2)], "target_f");
    }
}
