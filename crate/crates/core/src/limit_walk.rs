//! δ-skeleton of the limiting process on the quotient space.
//!
//! Between pocket visits the walk is Brownian motion in `U`. On reaching
//! `∂D_k` it sits at the collapsed point `d_k` for the deterministic time
//! `s·δ·Vol(D_k)/ν(∂D_k)` (`s` is the stickiness multiplier, 1 by default)
//! and then re-emerges on `∂D^{+δ}_k` at a uniformly distributed position.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusivity::DiffusivityField;
use crate::error::{Error, Result};
use crate::geometry::{boundary_direction, Geometry};
use crate::parallel::{map_paths, mean_stderr};
use crate::point::{self, Point};
use crate::sde::{run_path_observed, SdeConfig, Status, Surface};

/// A point of the quotient space `U'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuotientPoint<const D: usize> {
    Free(#[serde(with = "crate::geometry::point_serde")] Point<D>),
    Collapsed(usize),
}

/// The quotient map: `D̄_k ↦ d_k`, identity on `U`.
pub fn quotient_map<const D: usize>(geometry: &Geometry<D>, x: &Point<D>) -> QuotientPoint<D> {
    for p in geometry.pockets() {
        if p.ball.signed_distance(x) <= 1e-12 {
            return QuotientPoint::Collapsed(p.index);
        }
    }
    QuotientPoint::Free(point::wrap(x))
}

/// Parameters of the skeleton walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonConfig {
    pub delta: f64,
    /// Brownian step away from surfaces.
    pub dt0: f64,
    /// Near-surface refinement (see [`SdeConfig::local_dt`]).
    pub eta_rel: f64,
    pub step_floor: f64,
    /// Multiplier on the nominal holding time.
    pub stickiness: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Log every n-th Brownian step as a `move` event; 0 logs segment ends only.
    pub log_every: usize,
}

impl SkeletonConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            dt0: 1e-5,
            eta_rel: f64::INFINITY,
            step_floor: 0.0,
            stickiness: 1.0,
            t_max: 50.0,
            seed: 0,
            log_every: 0,
        }
    }

    fn brownian(&self, t_max: f64) -> SdeConfig {
        SdeConfig {
            eps: 1.0,
            dt0: self.dt0,
            eta_drift: 1.0,
            eta_diff: 1.0,
            eta_rel: self.eta_rel,
            step_floor: self.step_floor,
            t_max,
            seed: self.seed,
        }
    }

    fn validate<const D: usize>(&self, geometry: &Geometry<D>) -> Result<()> {
        geometry.check_delta(self.delta)?;
        if !(self.stickiness > 0.0 && self.stickiness.is_finite()) {
            return Err(Error::Config("stickiness must be positive".into()));
        }
        self.brownian(self.t_max).validate()
    }
}

/// Nominal holding time `δ·Vol(D_k)/ν(∂D_k)` at `d_k`.
pub fn pocket_holding_time<const D: usize>(geometry: &Geometry<D>, k: usize, delta: f64) -> f64 {
    let p = geometry.pocket(k);
    delta * p.volume() / p.boundary_measure()
}

/// Uniform point of `∂D_k` pushed a distance `δ` into `U`.
pub fn reentry_point<const D: usize, R: Rng + ?Sized>(
    geometry: &Geometry<D>,
    k: usize,
    delta: f64,
    rng: &mut R,
) -> Point<D> {
    let p = geometry.pocket(k);
    let dir = boundary_direction::<D>(rng.random::<f64>());
    point::wrap(&point::axpy(p.radius() + delta, &dir, &p.center()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Move,
    EnterPocket,
    Hold,
    Reenter,
    HitF,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Move => "move",
            EventKind::EnterPocket => "enter_pocket",
            EventKind::Hold => "hold",
            EventKind::Reenter => "reenter",
            EventKind::HitF => "hit_F",
        }
    }
}

/// One record of a skeleton path.
///
/// A pocket visit is `enter_pocket` at the hitting time (carrying the holding
/// duration and the entry point) followed by `reenter` once the holding time
/// has elapsed. A path started at `d_k` opens with a `hold` record instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent<const D: usize> {
    pub time: f64,
    pub kind: EventKind,
    pub state: QuotientPoint<D>,
    /// Physical position: the entry point for `enter_pocket`, the pocket
    /// center for an initial `hold`.
    pub location: Point<D>,
    /// Holding duration for `enter_pocket` and `hold`, 0 otherwise.
    pub hold: f64,
}

/// Ordered event log of one skeleton path on `[0, total_time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonPath<const D: usize> {
    pub events: Vec<PathEvent<D>>,
    pub delta: f64,
    pub total_time: f64,
    /// Hitting time of `F̄`, if reached.
    pub hit_time: Option<f64>,
}

impl<const D: usize> SkeletonPath<D> {
    /// Time spent at `d_k` within `[0, total_time]`.
    pub fn collapsed_time(&self, k: usize) -> f64 {
        self.events
            .iter()
            .filter(|e| {
                matches!(e.kind, EventKind::EnterPocket | EventKind::Hold)
                    && e.state == QuotientPoint::Collapsed(k)
            })
            .map(|e| e.hold.min(self.total_time - e.time))
            .sum()
    }
}

/// End state of [`walk`].
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSummary {
    pub time: f64,
    pub hit_f: bool,
    pub collapsed_time: Vec<f64>,
    pub visits: u64,
}

/// Runs the skeleton from `x0` until `F̄` is reached or `horizon` elapses,
/// passing every event to `sink`.
pub fn walk<const D: usize, R, S>(
    geometry: &Geometry<D>,
    x0: &QuotientPoint<D>,
    horizon: f64,
    cfg: &SkeletonConfig,
    rng: &mut R,
    mut sink: S,
) -> WalkSummary
where
    R: Rng + ?Sized,
    S: FnMut(PathEvent<D>),
{
    let n = geometry.pockets().len();
    let brownian = DiffusivityField::brownian(geometry.clone());
    let mut surfaces: Vec<Surface<D>> = geometry
        .pockets()
        .iter()
        .map(|p| Surface::solid(&p.ball))
        .collect();
    surfaces.extend(geometry.target().map(Surface::solid));

    let mut summary = WalkSummary {
        time: 0.0,
        hit_f: false,
        collapsed_time: vec![0.0; n],
        visits: 0,
    };
    let mut state = match *x0 {
        QuotientPoint::Free(x) => quotient_map(geometry, &x),
        c => c,
    };
    let mut t = 0.0;
    if let QuotientPoint::Collapsed(k) = state {
        let hold = cfg.stickiness * pocket_holding_time(geometry, k, cfg.delta);
        sink(PathEvent {
            time: 0.0,
            kind: EventKind::Hold,
            state,
            location: geometry.pocket(k).center(),
            hold,
        });
    }
    loop {
        match state {
            QuotientPoint::Collapsed(k) => {
                let hold = cfg.stickiness * pocket_holding_time(geometry, k, cfg.delta);
                if t + hold >= horizon {
                    summary.collapsed_time[k] += horizon - t;
                    summary.time = horizon;
                    return summary;
                }
                summary.collapsed_time[k] += hold;
                t += hold;
                let x = reentry_point(geometry, k, cfg.delta, rng);
                sink(PathEvent {
                    time: t,
                    kind: EventKind::Reenter,
                    state: QuotientPoint::Free(x),
                    location: x,
                    hold: 0.0,
                });
                state = QuotientPoint::Free(x);
            }
            QuotientPoint::Free(x) => {
                if t == 0.0 {
                    sink(PathEvent {
                        time: 0.0,
                        kind: if geometry.in_target(&x) {
                            EventKind::HitF
                        } else {
                            EventKind::Move
                        },
                        state,
                        location: x,
                        hold: 0.0,
                    });
                    if geometry.in_target(&x) {
                        summary.hit_f = true;
                        return summary;
                    }
                }
                let sde = cfg.brownian(horizon - t);
                let mut count = 0usize;
                let offset = t;
                let out = run_path_observed(&brownian, &x, &surfaces, &sde, None, rng, |s, y| {
                    count += 1;
                    if cfg.log_every > 0 && count.is_multiple_of(cfg.log_every) {
                        sink(PathEvent {
                            time: offset + s,
                            kind: EventKind::Move,
                            state: QuotientPoint::Free(*y),
                            location: *y,
                            hold: 0.0,
                        });
                    }
                });
                t += out.tau;
                match (out.status, out.surface) {
                    (Status::Hit, Some(i)) if i < n => {
                        summary.visits += 1;
                        let hold = cfg.stickiness * pocket_holding_time(geometry, i, cfg.delta);
                        state = QuotientPoint::Collapsed(i);
                        sink(PathEvent {
                            time: t,
                            kind: EventKind::EnterPocket,
                            state,
                            location: out.exit,
                            hold,
                        });
                    }
                    (Status::Hit, _) => {
                        sink(PathEvent {
                            time: t,
                            kind: EventKind::HitF,
                            state: QuotientPoint::Free(out.exit),
                            location: out.exit,
                            hold: 0.0,
                        });
                        summary.time = t;
                        summary.hit_f = true;
                        return summary;
                    }
                    (Status::Timeout, _) => {
                        sink(PathEvent {
                            time: horizon,
                            kind: EventKind::Move,
                            state: QuotientPoint::Free(out.exit),
                            location: out.exit,
                            hold: 0.0,
                        });
                        summary.time = horizon;
                        return summary;
                    }
                }
            }
        }
    }
}

/// Samples one skeleton path on `[0, horizon]`, stopping early at `F̄`.
pub fn sample_path<const D: usize, R: Rng + ?Sized>(
    geometry: &Geometry<D>,
    x0: &QuotientPoint<D>,
    horizon: f64,
    cfg: &SkeletonConfig,
    rng: &mut R,
) -> Result<SkeletonPath<D>> {
    cfg.validate(geometry)?;
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon {horizon} must be positive")));
    }
    let mut events = Vec::new();
    let s = walk(geometry, x0, horizon, cfg, rng, |e| events.push(e));
    Ok(SkeletonPath {
        events,
        delta: cfg.delta,
        total_time: s.time,
        hit_time: s.hit_f.then_some(s.time),
    })
}

/// Monte-Carlo estimate of the hitting time of `F̄`.
#[derive(Debug, Clone)]
pub struct HittingEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub timeouts: usize,
    /// Per-path hitting time (`t_max` on timeout), in path order.
    pub times: Vec<f64>,
    /// Per-path number of pocket visits.
    pub visits: Vec<u64>,
}

/// Mean hitting time of `F̄` along skeleton paths from `x0`.
pub fn hitting_time_f<const D: usize>(
    geometry: &Geometry<D>,
    x0: &QuotientPoint<D>,
    cfg: &SkeletonConfig,
    n_paths: usize,
    workers: usize,
) -> Result<HittingEstimate> {
    cfg.validate(geometry)?;
    if geometry.target().is_none() {
        return Err(Error::Config("target domain F is not defined".into()));
    }
    let runs = map_paths(n_paths, cfg.seed, workers, |_, rng| {
        walk(geometry, x0, cfg.t_max, cfg, rng, |_| {})
    })?;
    let timeouts = runs.iter().filter(|r| !r.hit_f).count();
    if timeouts * 100 > n_paths {
        return Err(Error::TimeoutDominated {
            timeouts,
            paths: n_paths,
        });
    }
    let hit: Vec<f64> = runs.iter().filter(|r| r.hit_f).map(|r| r.time).collect();
    let (mean, stderr) = mean_stderr(&hit);
    Ok(HittingEstimate {
        mean,
        stderr,
        timeouts,
        times: runs.iter().map(|r| r.time).collect(),
        visits: runs.iter().map(|r| r.visits).collect(),
    })
}

/// Mean fraction of `[0, horizon]` spent at each collapsed point, with standard errors.
pub fn collapsed_occupation<const D: usize>(
    geometry: &Geometry<D>,
    x0: &QuotientPoint<D>,
    horizon: f64,
    cfg: &SkeletonConfig,
    n_paths: usize,
    workers: usize,
) -> Result<Vec<(f64, f64)>> {
    cfg.validate(geometry)?;
    let geometry = geometry.without_target();
    let runs = map_paths(n_paths, cfg.seed, workers, |_, rng| {
        walk(&geometry, x0, horizon, cfg, rng, |_| {})
    })?;
    Ok((0..geometry.pockets().len())
        .map(|k| {
            let xs: Vec<f64> = runs.iter().map(|r| r.collapsed_time[k] / horizon).collect();
            mean_stderr(&xs)
        })
        .collect())
}
