use rand::Rng;

use crate::diffusivity::{barrier_dw, verify_supersolution, BarrierParams, DiffusivityField};
use crate::elliptic::{
    closed_form_1d, resolvent_coupling_1d, solve_hitting_problem, EllipticSolution, FluxOptions,
    Grid, ResolventSolver,
};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::limit_walk::{hitting_time_f, QuotientPoint};
use crate::parallel::path_rng;
use crate::point::{self, Point};
use crate::sde::{
    mc_exit_distribution, mc_exit_time, ExitTimeEstimate, Status, Target, TrajectoryOutcome,
};

use super::config::ExperimentConfig;
use super::report::{num, Relation, Report, Table};
use super::Experiment;

/// Shell exit law: `|mean/(δ·Vol/ν) − 1|`.
const SHELL_MEAN_TOL: f64 = 0.15;
/// Shell exit law: `sup mean <= 3·δ·Vol/ν`.
const SHELL_SUP_FACTOR: f64 = 3.0;
/// Consecutive exit-time means must differ by more than this many standard errors.
const DECREASE_SIGMAS: f64 = 3.0;
/// Max-to-min ratio of `mean/√ε`.
const SQRT_EPS_RATIO: f64 = 4.0;
const TV_TOL: f64 = 0.08;
const GRID_C_TOL: f64 = 1e-3;
const GRID_U_TOL: f64 = 1e-3;
const FLUX_RESIDUAL_TOL: f64 = 1e-8;
const GRID_REFINEMENT_TOL: f64 = 0.01;
const MC_PDE_TOL_1D: f64 = 0.05;
const MC_PDE_TOL_2D: f64 = 0.07;
const SKELETON_PDE_TOL: f64 = 0.07;
const SKELETON_SDE_TOL: f64 = 0.10;
const RESOLVENT_CONST_TOL: f64 = 1e-10;
const RESOLVENT_MIN_TOL: f64 = -1e-10;
const BARRIER_MAX: f64 = -0.5;
const BARRIER_DW_TOL: f64 = 1e-12;

pub(super) fn dispatch<const D: usize>(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    report: &mut Report,
) -> Result<()> {
    match experiment {
        Experiment::ExitVanishing => exit_vanishing::<D>(cfg, report),
        Experiment::ShellExit => shell_exit::<D>(cfg, report),
        Experiment::Redistribution => redistribution::<D>(cfg, report),
        Experiment::HittingCompare => hitting_compare::<D>(cfg, report),
        Experiment::ResolventCheck => resolvent_check::<D>(cfg, report),
        Experiment::BarrierCheck => barrier_check::<D>(cfg, report),
        Experiment::SkeletonConsistency => skeleton_consistency::<D>(cfg, report),
    }
}

/// Exact mean exit time of the centered ball `D^{+δ}` (pocket radius `r`,
/// amplitude `A`) from radius `rho0`, for the radially symmetric field.
pub fn radial_exit_time(d: usize, r: f64, amplitude: f64, eps: f64, delta: f64, rho0: f64) -> f64 {
    let d = d as f64;
    let shell = |rho: f64| ((r + delta).powi(2) - rho * rho) / d;
    if rho0 >= r {
        return shell(rho0);
    }
    let k = (amplitude / eps).sqrt();
    let t0 = 1.0 - (rho0 / r).powi(2);
    shell(r) + r * r / d * (k * t0).atan() / k
}

fn field<const D: usize>(cfg: &ExperimentConfig) -> Result<DiffusivityField<D>> {
    DiffusivityField::new(cfg.geometry::<D>()?, cfg.amplitudes.clone())
}

fn path_table() -> Table {
    Table::new(&["group", "path_id", "tau", "status", "steps", "exit_param"])
}

fn push_paths<const D: usize>(
    table: &mut Table,
    group: &str,
    outcomes: &[TrajectoryOutcome<D>],
    exit_param: impl Fn(&TrajectoryOutcome<D>) -> Option<f64>,
) {
    for o in outcomes {
        table.push(vec![
            group.into(),
            o.path_id.to_string(),
            num(o.tau),
            o.status.as_str().into(),
            o.steps.to_string(),
            exit_param(o).map(num).unwrap_or_default(),
        ]);
    }
}

fn pocket_of<const D: usize>(geometry: &Geometry<D>, x: &Point<D>) -> Result<usize> {
    geometry
        .nearest_pocket(x)
        .filter(|n| n.inside || n.distance <= 1e-9)
        .map(|n| n.pocket)
        .ok_or_else(|| Error::Config("start point is not in a pocket".into()))
}

fn exit_vanishing<const D: usize>(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let field = field::<D>(cfg)?;
    let geometry = field.geometry();
    let x0 = if cfg.starts.is_empty() {
        geometry.pocket(0).center()
    } else {
        cfg.start_point(geometry, 0)?
    };
    let k = pocket_of(geometry, &x0)?;
    let pocket = geometry.pocket(k);
    let rho0 = point::torus_dist(&x0, &pocket.center());
    let mut table = path_table();
    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let sde = cfg.sde.sde(eps, cfg.seed);
        let est = mc_exit_time(
            &field,
            &x0,
            &Target::PocketBoundary { pocket: k },
            &sde,
            cfg.paths,
            cfg.workers,
            None,
        )?;
        let exact = radial_exit_time(D, pocket.radius(), field.amplitudes()[k], eps, 0.0, rho0);
        report.estimate(format!("mean_tau[eps={eps:e}]"), est.mean, Some(est.stderr));
        report.reference(format!("exact_tau[eps={eps:e}]"), exact);
        report.diagnostic(format!("rel_error[eps={eps:e}]"), est.mean / exact - 1.0);
        push_paths(&mut table, &format!("eps={eps:e}"), &est.outcomes, |_| None);
        rows.push((eps, est.mean, est.stderr));
    }
    let z = rows
        .windows(2)
        .map(|w| (w[0].1 - w[1].1) / (w[0].2.powi(2) + w[1].2.powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min);
    report.check("decrease_sigmas", z, Relation::Above, DECREASE_SIGMAS);
    let scaled: Vec<f64> = rows.iter().map(|(e, m, _)| m / e.sqrt()).collect();
    for ((eps, _, _), s) in rows.iter().zip(&scaled) {
        report.estimate(format!("mean_over_sqrt_eps[eps={eps:e}]"), *s, None);
    }
    let max = scaled.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = scaled.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    report.check(
        "sqrt_eps_ratio",
        max / min,
        Relation::AtMost,
        SQRT_EPS_RATIO,
    );
    report.paths = table;
    Ok(())
}

fn shell_exit<const D: usize>(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let field = field::<D>(cfg)?;
    let geometry = field.geometry();
    let (eps, delta) = (cfg.eps[0], cfg.delta[0]);
    let x0 = if cfg.starts.is_empty() {
        geometry.boundary_sample(0, 0.0)
    } else {
        cfg.start_point(geometry, 0)?
    };
    let k = pocket_of(geometry, &x0)?;
    let pocket = geometry.pocket(k);
    let (r, amp) = (pocket.radius(), field.amplitudes()[k]);
    let (dir, rho) = {
        let (v, rho) = pocket.ball.offset(&x0);
        (point::scale(&v, 1.0 / rho), rho)
    };
    if (rho - r).abs() > 1e-9 {
        return Err(Error::Config(
            "starts[0]: shell-exit needs a start on the pocket boundary".into(),
        ));
    }
    let law = delta * pocket.volume() / pocket.boundary_measure();
    let sde = cfg.sde.sde(eps, cfg.seed);
    let target = Target::OuterShell { pocket: k, delta };
    let run = |x: &Point<D>, n: usize| mc_exit_time(&field, x, &target, &sde, n, cfg.workers, None);

    let mut table = path_table();
    let main = run(&x0, cfg.paths)?;
    push_paths(&mut table, "boundary", &main.outcomes, |_| None);
    report.estimate("mean_tau", main.mean, Some(main.stderr));
    report.reference("shell_law", law);
    report.diagnostic("exact_tau", radial_exit_time(D, r, amp, eps, delta, r));
    report.diagnostic("ratio_to_twice_shell_law", main.mean / (2.0 * law));
    report.check(
        "shell_mean_rel_error",
        (main.mean / law - 1.0).abs(),
        Relation::AtMost,
        SHELL_MEAN_TOL,
    );

    let n_sup = cfg.reference_paths.unwrap_or(cfg.paths);
    let mut sup = main.mean;
    for (name, rho0) in [
        ("center", 0.0),
        ("half_radius", 0.5 * r),
        ("mid_shell", r + 0.5 * delta),
    ] {
        let x = point::wrap(&point::axpy(rho0, &dir, &pocket.center()));
        let est = run(&x, n_sup)?;
        push_paths(&mut table, name, &est.outcomes, |_| None);
        report.estimate(format!("mean_tau[{name}]"), est.mean, Some(est.stderr));
        report.diagnostic(
            format!("exact_tau[{name}]"),
            radial_exit_time(D, r, amp, eps, delta, rho0),
        );
        sup = sup.max(est.mean);
    }
    report.check(
        "shell_sup_mean",
        sup,
        Relation::AtMost,
        SHELL_SUP_FACTOR * law,
    );
    report.paths = table;
    Ok(())
}

fn redistribution<const D: usize>(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let field = field::<D>(cfg)?;
    let geometry = field.geometry();
    let (eps, delta) = (cfg.eps[0], cfg.delta[0]);
    let sde = cfg.sde.sde(eps, cfg.seed);
    let mut table = path_table();
    let mut measures = Vec::new();
    for i in 0..2 {
        let x0 = cfg.start_point(geometry, i)?;
        let k = pocket_of(geometry, &x0)?;
        let m = mc_exit_distribution(
            &field,
            k,
            &x0,
            delta,
            &sde,
            cfg.paths,
            cfg.bins,
            cfg.workers,
        )?;
        push_paths(&mut table, &format!("start{i}"), &m.exit.outcomes, |o| {
            (o.status == Status::Hit).then(|| geometry.boundary_param(k, &o.exit))
        });
        report.estimate(
            format!("mean_tau[start{i}]"),
            m.exit.mean,
            Some(m.exit.stderr),
        );
        for (b, mass) in m.masses.iter().enumerate() {
            report.estimate(format!("mass[start{i}][bin{b}]"), *mass, None);
        }
        report.check(
            format!("tv_to_uniform[start{i}]"),
            m.tv_to_uniform(),
            Relation::AtMost,
            TV_TOL,
        );
        measures.push(m);
    }
    report.check(
        "tv_between_starts",
        measures[0].tv(&measures[1]),
        Relation::AtMost,
        TV_TOL,
    );
    report.paths = table;
    Ok(())
}

/// Value of the grid or exact solution at a start.
fn pde_value<const D: usize>(
    sol: &EllipticSolution<'_, D>,
    start: &QuotientPoint<D>,
) -> Result<f64> {
    match start {
        QuotientPoint::Collapsed(k) => Ok(sol.constants[*k]),
        QuotientPoint::Free(x) => sol
            .eval(x)
            .ok_or_else(|| Error::Config("start lies in the target domain".into())),
    }
}

fn hitting_compare<const D: usize>(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let geometry = cfg.geometry::<D>()?;
    let opts = FluxOptions {
        stickiness: cfg.stickiness,
        ..FluxOptions::default()
    };
    let doubled = FluxOptions {
        stickiness: 2.0 * cfg.stickiness,
        ..opts
    };
    let exact_1d = match D {
        1 => {
            let g1: Geometry<1> = cfg.geometry::<1>()?;
            Some((
                closed_form_1d(&g1, cfg.stickiness)?,
                closed_form_1d(&g1, 2.0 * cfg.stickiness)?,
            ))
        }
        _ => None,
    };
    let grids: Vec<Grid<D>> = cfg
        .grid
        .iter()
        .map(|&n| Grid::new(&geometry, n))
        .collect::<Result<_>>()?;
    let mut constants = Vec::new();
    for (grid, n) in grids.iter().zip(&cfg.grid) {
        let sol = solve_hitting_problem(grid, &opts)?;
        let tag = format!("n={n}");
        for (k, c) in sol.constants.iter().enumerate() {
            report.estimate(format!("c{k}[{tag}]"), *c, None);
        }
        report.diagnostic(format!("interior_residual[{tag}]"), sol.interior_residual);
        report.diagnostic(format!("condition_number[{tag}]"), sol.condition_number);
        report.check(
            format!("flux_residual[{tag}]"),
            sol.max_flux_residual(),
            Relation::AtMost,
            FLUX_RESIDUAL_TOL,
        );
        if let Some((cf, _)) = &exact_1d {
            let c_err = sol
                .constants
                .iter()
                .zip(&cf.constants)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let u_err = sol
                .nodes()
                .map(|(x, u)| (u - cf.eval(x[0])).abs())
                .fold(0.0, f64::max);
            report.check(
                format!("c_error[{tag}]"),
                c_err,
                Relation::AtMost,
                GRID_C_TOL,
            );
            report.check(
                format!("u_sup_error[{tag}]"),
                u_err,
                Relation::AtMost,
                GRID_U_TOL,
            );
        }
        constants.push(sol.constants.clone());
    }
    if let Some((cf, cf2)) = &exact_1d {
        for (k, c) in cf.constants.iter().enumerate() {
            report.reference(format!("c{k}_exact"), *c);
            report.diagnostic(format!("c{k}_exact[doubled_stickiness]"), cf2.constants[k]);
        }
    } else {
        for (i, w) in cfg.grid.windows(2).enumerate() {
            if w[1] == 2 * w[0] {
                let rel = constants[i]
                    .iter()
                    .zip(&constants[i + 1])
                    .map(|(a, b)| (a - b).abs() / b.abs())
                    .fold(0.0, f64::max);
                report.check(
                    format!("grid_refinement[n={}]", w[0]),
                    rel,
                    Relation::AtMost,
                    GRID_REFINEMENT_TOL,
                );
            }
        }
    }
    if cfg.eps.is_empty() || cfg.starts.is_empty() {
        return Ok(());
    }

    // Monte-Carlo side against the finest grid (or the exact solution in 1D).
    let field = field::<D>(cfg)?;
    let finest = grids
        .last()
        .ok_or_else(|| Error::Config("grid: needs a resolution for the reference".into()))?;
    let sol = solve_hitting_problem(finest, &opts)?;
    let sol2 = solve_hitting_problem(finest, &doubled)?;
    let tol = if D == 1 { MC_PDE_TOL_1D } else { MC_PDE_TOL_2D };
    let sde = cfg.sde.sde(cfg.eps[0], cfg.seed);
    let mut table = path_table();
    for i in 0..cfg.starts.len() {
        let start = cfg.start::<D>(i)?;
        let x0 = cfg.start_point(&geometry, i)?;
        let (reference, doubled_ref) = match (&exact_1d, start) {
            (Some((cf, cf2)), QuotientPoint::Collapsed(k)) => (cf.constants[k], cf2.constants[k]),
            (Some((cf, cf2)), QuotientPoint::Free(x)) => (cf.eval(x[0]), cf2.eval(x[0])),
            (None, s) => (pde_value(&sol, &s)?, pde_value(&sol2, &s)?),
        };
        let est = mc_exit_time(
            &field,
            &x0,
            &Target::TargetClosure,
            &sde,
            cfg.paths,
            cfg.workers,
            None,
        )?;
        push_paths(&mut table, &format!("start{i}"), &est.outcomes, |_| None);
        report.estimate(format!("mc_mean[start{i}]"), est.mean, Some(est.stderr));
        report.reference(format!("pde_value[start{i}]"), reference);
        report.diagnostic(
            format!("pde_value[start{i}][doubled_stickiness]"),
            doubled_ref,
        );
        report.diagnostic(
            format!("rel_error[start{i}][doubled_stickiness]"),
            (est.mean / doubled_ref - 1.0).abs(),
        );
        report.check(
            format!("mc_rel_error[start{i}]"),
            (est.mean / reference - 1.0).abs(),
            Relation::AtMost,
            tol,
        );
    }
    report.paths = table;
    Ok(())
}

/// Nonnegative random trigonometric source.
fn random_source<const D: usize, R: Rng>(rng: &mut R) -> impl Fn(&Point<D>) -> f64 {
    let modes: Vec<(f64, [f64; D], f64)> = (0..4)
        .map(|_| {
            let mut k = [0.0; D];
            for c in &mut k {
                *c = rng.random_range(-3i32..=3) as f64;
            }
            (rng.random::<f64>(), k, rng.random::<f64>())
        })
        .collect();
    move |x: &Point<D>| {
        modes
            .iter()
            .map(|(a, k, ph)| a * (1.0 + (std::f64::consts::TAU * (point::dot(k, x) + ph)).sin()))
            .sum()
    }
}

fn resolvent_check<const D: usize>(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let geometry = cfg.geometry::<D>()?.without_target();
    let np = geometry.pockets().len();
    let lambda = cfg.lambda.first().copied().unwrap_or(1.0);
    let opts = FluxOptions {
        stickiness: cfg.stickiness,
        ..FluxOptions::default()
    };
    let grid = Grid::new(&geometry, cfg.grid[0])?;
    let solver = ResolventSolver::new(&grid, lambda, &opts)?;
    let mut flux = 0.0f64;
    let mut interior = 0.0f64;

    let kappa = 1.0;
    let sol = solver.solve(|_| kappa, &vec![kappa; np])?;
    let exact = kappa / lambda;
    let const_err = sol
        .field
        .values
        .iter()
        .chain(&sol.constants)
        .map(|v| (v - exact).abs())
        .fold(0.0, f64::max);
    flux = flux.max(sol.max_flux_residual());
    interior = interior.max(sol.interior_residual);
    report.reference("constant_solution", exact);
    report.diagnostic("condition_number", sol.condition_number);
    report.check(
        "constant_source_error",
        const_err,
        Relation::AtMost,
        RESOLVENT_CONST_TOL,
    );

    let mut table = Table::new(&["sample", "min_f", "max_flux_residual", "interior_residual"]);
    let mut min_f = f64::INFINITY;
    for i in 0..cfg.samples {
        let mut rng = path_rng(cfg.seed, i as u64);
        let psi = random_source::<D, _>(&mut rng);
        let at_pockets: Vec<f64> = (0..np).map(|_| rng.random::<f64>()).collect();
        let sol = solver.solve(psi, &at_pockets)?;
        let m = sol
            .field
            .values
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        table.push(vec![
            i.to_string(),
            num(m),
            num(sol.max_flux_residual()),
            num(sol.interior_residual),
        ]);
        min_f = min_f.min(m);
        flux = flux.max(sol.max_flux_residual());
        interior = interior.max(sol.interior_residual);
    }
    report.check(
        "min_f_nonnegative_sources",
        min_f,
        Relation::AtLeast,
        RESOLVENT_MIN_TOL,
    );
    report.check("flux_residual", flux, Relation::AtMost, FLUX_RESIDUAL_TOL);
    report.diagnostic("interior_residual", interior);
    if D == 1 {
        let g1: Geometry<1> = cfg.geometry::<1>()?.without_target();
        let k = resolvent_coupling_1d(&g1, lambda, cfg.stickiness)?;
        let margin = (0..np)
            .map(|j| {
                k[(j, j)]
                    - (0..np)
                        .filter(|&m| m != j)
                        .map(|m| k[(j, m)].abs())
                        .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        report.diagnostic("coupling_1d_dominance_margin", margin);
    }
    report.paths = table;
    Ok(())
}

fn barrier_check<const D: usize>(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let field = field::<D>(cfg)?;
    let delta = cfg.delta[0];
    let mut table = Table::new(&["eps", "pocket", "depth", "a1", "a2", "a3", "total"]);
    for &eps in &cfg.eps {
        for k in 0..field.geometry().pockets().len() {
            let p = BarrierParams::for_pocket(&field, k, delta, eps)?;
            let res = verify_supersolution(&field, k, &p, cfg.samples)?;
            for s in &res.samples {
                table.push(vec![
                    num(eps),
                    k.to_string(),
                    num(s.depth),
                    num(s.a1),
                    num(s.a2),
                    num(s.a3),
                    num(s.total()),
                ]);
            }
            let tag = format!("eps={eps:e}][pocket={k}");
            report.diagnostic(format!("sup_u[{tag}]"), res.sup_u);
            report.check(
                format!("max_operator[{tag}]"),
                res.max,
                Relation::AtMost,
                BARRIER_MAX,
            );
            report.check(
                format!("dw_at_delta[{tag}]"),
                barrier_dw(delta, &p).abs(),
                Relation::AtMost,
                BARRIER_DW_TOL,
            );
        }
    }
    report.paths = table;
    Ok(())
}

fn skeleton_consistency<const D: usize>(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let geometry = cfg.geometry::<D>()?;
    let start = if cfg.starts.is_empty() {
        QuotientPoint::Collapsed(0)
    } else {
        cfg.start::<D>(0)?
    };
    let mut table = Table::new(&["group", "path_id", "time", "pocket_visits"]);
    let mut means = Vec::new();
    for &delta in &cfg.delta {
        let sk = cfg
            .skeleton_steps()
            .skeleton(delta, cfg.seed, cfg.stickiness);
        let est = hitting_time_f(&geometry, &start, &sk, cfg.paths, cfg.workers)?;
        for (i, (t, v)) in est.times.iter().zip(&est.visits).enumerate() {
            table.push(vec![
                format!("delta={delta:e}"),
                i.to_string(),
                num(*t),
                v.to_string(),
            ]);
        }
        report.estimate(
            format!("skeleton_mean[delta={delta:e}]"),
            est.mean,
            Some(est.stderr),
        );
        means.push((delta, est.mean));
    }

    let (reference, name, tol) = if D == 1 {
        let g1: Geometry<1> = cfg.geometry::<1>()?;
        let cf = closed_form_1d(&g1, cfg.stickiness)?;
        let v = match start {
            QuotientPoint::Collapsed(k) => cf.constants[k],
            QuotientPoint::Free(x) => cf.eval(x[0]),
        };
        report.reference("pde_value", v);
        (v, "skeleton_vs_pde", SKELETON_PDE_TOL)
    } else {
        let field = field::<D>(cfg)?;
        let eps = *cfg
            .eps
            .first()
            .ok_or_else(|| Error::Config("eps: the diffusion reference needs a value".into()))?;
        let x0 = match start {
            QuotientPoint::Collapsed(k) => geometry.pocket(k).center(),
            QuotientPoint::Free(x) => x,
        };
        let sde = cfg.sde.sde(eps, cfg.seed);
        let n = cfg.reference_paths.unwrap_or(cfg.paths);
        let est: ExitTimeEstimate<D> = mc_exit_time(
            &field,
            &x0,
            &Target::TargetClosure,
            &sde,
            n,
            cfg.workers,
            None,
        )?;
        for o in &est.outcomes {
            table.push(vec![
                "sde".into(),
                o.path_id.to_string(),
                num(o.tau),
                String::new(),
            ]);
        }
        report.estimate("sde_mean", est.mean, Some(est.stderr));
        if let Some(&n) = cfg.grid.last() {
            let grid = Grid::new(&geometry, n)?;
            let opts = FluxOptions {
                stickiness: cfg.stickiness,
                ..FluxOptions::default()
            };
            let sol = solve_hitting_problem(&grid, &opts)?;
            report.diagnostic("pde_value", pde_value(&sol, &start)?);
        }
        (est.mean, "skeleton_vs_sde", SKELETON_SDE_TOL)
    };
    for (delta, mean) in means {
        report.check(
            format!("{name}[delta={delta:e}]"),
            (mean / reference - 1.0).abs(),
            Relation::AtMost,
            tol,
        );
    }
    report.paths = table;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_oracle_values() {
        let t = |e| radial_exit_time(2, 0.15, 0.1, e, 0.0, 0.0);
        assert!((t(1e-2) / 0.0045 - 1.0).abs() < 0.01);
        assert!((t(1e-3) / 0.001655 - 1.0).abs() < 0.01);
        assert!((t(1e-4) / 0.000547 - 1.0).abs() < 0.01);
        assert!((radial_exit_time(2, 0.15, 0.1, 1e-4, 0.02, 0.15) - 0.0032).abs() < 1e-12);
    }
}
