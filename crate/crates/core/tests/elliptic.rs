use pocketlab_core::elliptic::{
    closed_form_1d, flux_integral, solve_dirichlet, solve_hitting_problem, solve_resolvent,
    FluxOptions, Grid, GridField, NodeClass, ResolventSolver, Wall,
};
use pocketlab_core::{Ball, Error, Geometry};
use rand::{Rng, SeedableRng};

fn symmetric_1d() -> Geometry<1> {
    Geometry::new(vec![Ball::new([0.1], 0.1)], Some(Ball::new([0.6], 0.05))).unwrap()
}

fn disk_2d() -> Geometry<2> {
    Geometry::new(
        vec![Ball::new([0.5, 0.5], 0.15)],
        Some(Ball::new([0.0, 0.0], 0.1)),
    )
    .unwrap()
}

#[test]
fn poisson_on_interval_is_exact() {
    // U = (0, 0.35): the complement is a single wall.
    let g = Geometry::new(vec![Ball::new([0.675], 0.325)], None).unwrap();
    let grid = Grid::new(&g, 1000).unwrap();
    let u = solve_dirichlet(&grid, |_| 1.0, &[0.0], 0.0).unwrap();
    let mut err = 0.0f64;
    for node in 0..grid.len() {
        let x = grid.coords(node)[0];
        if x < 0.35 {
            err = err.max((u.values[node] - x * (0.35 - x)).abs());
        }
    }
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn constant_boundary_data_extends_harmonically() {
    let grid = Grid::new(&disk_2d(), 64).unwrap();
    let u = solve_dirichlet(&grid, |_| 0.0, &[2.5, 2.5], 0.0).unwrap();
    assert!(u.values.iter().all(|v| (v - 2.5).abs() < 1e-10));
}

#[test]
fn constant_rhs_with_positive_lambda() {
    let grid = Grid::new(&disk_2d(), 64).unwrap();
    let (kappa, lambda) = (3.0, 2.0);
    let u = solve_dirichlet(&grid, |_| kappa, &[kappa / lambda; 2], lambda).unwrap();
    assert!(u.values.iter().all(|v| (v - kappa / lambda).abs() < 1e-10));
}

#[test]
fn singular_without_walls() {
    let g = Geometry::<2>::new(vec![], None).unwrap();
    let grid = Grid::new(&g, 16).unwrap();
    assert!(matches!(
        solve_dirichlet(&grid, |_| 1.0, &[], 0.0),
        Err(Error::SingularSystem(_))
    ));
}

#[test]
fn grid_classification() {
    let grid = Grid::new(&disk_2d(), 64).unwrap();
    let stats = grid.stats();
    assert!(stats.min_theta > 0.0 && stats.min_theta <= 1.0);
    assert!(stats.irregular > 0);
    let center = (0..grid.len())
        .find(|&n| grid.coords(n) == [0.5, 0.5])
        .unwrap();
    assert_eq!(grid.class(center), NodeClass::Excluded(Wall::Pocket(0)));
    assert_eq!(grid.class(0), NodeClass::Excluded(Wall::Target));
    assert!((0..grid.len()).any(|n| grid.class(n) == NodeClass::PocketBoundary(0)));
    assert!((0..grid.len()).any(|n| grid.class(n) == NodeClass::TargetBoundary));
}

#[test]
fn flux_of_constant_and_linear_fields() {
    let grid = Grid::new(&disk_2d(), 128).unwrap();
    let c = GridField::from_fn(&grid, &[1.0, 1.0], |_| 1.0);
    assert!(flux_integral(&grid, &c, 0).unwrap().abs() < 1e-8);
    let lin = GridField::from_fn(&grid, &[0.5, 0.0], |x| x[0]);
    assert!(flux_integral(&grid, &lin, 0).unwrap().abs() < 1e-8);
}

#[test]
fn annulus_flux_matches_radial_derivative() {
    let (r_in, r_out) = (0.15, 0.4);
    let g = Geometry::new(vec![Ball::new([0.5, 0.5], r_in)], None).unwrap();
    let grid = Grid::new(&g, 256).unwrap();
    let log = (r_out / r_in).ln();
    let h = GridField::from_fn(&grid, &[1.0], |x| {
        let rho = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
        (r_out / rho).ln() / log
    });
    let flux = flux_integral(&grid, &h, 0).unwrap();
    let exact = std::f64::consts::TAU / log;
    assert!((flux / exact - 1.0).abs() < 1e-4, "{flux} vs {exact}");
}

#[test]
fn under_resolved_pocket_has_no_stencil() {
    let g = Geometry::new(
        vec![Ball::new([0.5, 0.5], 0.05)],
        Some(Ball::new([0.5, 0.58], 0.02)),
    )
    .unwrap();
    let grid = Grid::new(&g, 64).unwrap();
    let f = GridField::from_fn(&grid, &[0.0, 0.0], |_| 0.0);
    assert!(matches!(
        flux_integral(&grid, &f, 0),
        Err(Error::InsufficientStencil { pocket: 0 })
    ));
}

#[test]
fn hitting_1d_matches_closed_form() {
    let g = symmetric_1d();
    let exact = closed_form_1d(&g, 1.0).unwrap();
    for n in [1000, 2000] {
        let grid = Grid::new(&g, n).unwrap();
        let sol = solve_hitting_problem(&grid, &FluxOptions::default()).unwrap();
        assert!((sol.constants[0] - 0.1575).abs() <= 1e-3);
        assert!(sol.max_flux_residual() <= 1e-8);
        assert!(sol.interior_residual <= 1e-9);
        let err = sol
            .nodes()
            .map(|(x, u)| (u - exact.eval(x[0])).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
    }
}

#[test]
fn hitting_1d_grid_error_decays_quadratically() {
    // Off-grid walls so the irregular arms are exercised.
    let g = Geometry::new(
        vec![Ball::new([0.1037], 0.0911)],
        Some(Ball::new([0.6121], 0.0473)),
    )
    .unwrap();
    let exact = closed_form_1d(&g, 1.0).unwrap();
    let mut pts = Vec::new();
    for n in [100, 200, 400] {
        let grid = Grid::new(&g, n).unwrap();
        let sol = solve_hitting_problem(&grid, &FluxOptions::default()).unwrap();
        let err = sol
            .nodes()
            .map(|(x, u)| (u - exact.eval(x[0])).abs())
            .fold(0.0, f64::max)
            .max(1e-15);
        pts.push(((1.0 / n as f64).ln(), err.ln()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let worst = pts.iter().map(|p| p.1.exp()).fold(0.0, f64::max);
    assert!(
        slope >= 1.8 || worst < 1e-11,
        "slope {slope}, errors {pts:?}"
    );
}

#[test]
fn hitting_2d_refinement_and_maximum_principle() {
    let g = disk_2d();
    let coarse = Grid::new(&g, 128).unwrap();
    let fine = Grid::new(&g, 256).unwrap();
    let a = solve_hitting_problem(&coarse, &FluxOptions::default()).unwrap();
    let b = solve_hitting_problem(&fine, &FluxOptions::default()).unwrap();
    let rel = (a.constants[0] - b.constants[0]).abs() / b.constants[0];
    assert!(rel <= 0.01, "{rel}");
    assert!(b.max_flux_residual() <= 1e-8);
    assert!(b.interior_residual <= 1e-9);
    assert!(b.field.values.iter().all(|&v| v >= -1e-12));
    assert!(b.condition_number.is_finite());
    assert_eq!(b.eval(&[0.05, 0.0]), None);
    assert_eq!(b.eval(&[0.5, 0.5]), Some(b.constants[0]));
}

#[test]
fn hitting_needs_target() {
    let g = Geometry::new(vec![Ball::new([0.5, 0.5], 0.15)], None).unwrap();
    let grid = Grid::new(&g, 64).unwrap();
    assert!(matches!(
        solve_hitting_problem(&grid, &FluxOptions::default()),
        Err(Error::Config(_))
    ));
}

fn resolvent_grid() -> Grid<2> {
    let g = Geometry::new(
        vec![Ball::new([0.3, 0.3], 0.12), Ball::new([0.72, 0.65], 0.1)],
        None,
    )
    .unwrap();
    Grid::new(&g, 96).unwrap()
}

#[test]
fn resolvent_constant_source() {
    let grid = resolvent_grid();
    let (kappa, lambda) = (1.7, 0.8);
    let sol = solve_resolvent(
        &grid,
        lambda,
        |_| kappa,
        &[kappa, kappa],
        &FluxOptions::default(),
    )
    .unwrap();
    for c in &sol.constants {
        assert!((c - kappa / lambda).abs() <= 1e-10);
    }
    for g in sol.g.as_ref().unwrap() {
        assert!(g.abs() <= 1e-9);
    }
    assert!(sol
        .field
        .values
        .iter()
        .all(|v| (v - kappa / lambda).abs() <= 1e-10));
}

#[test]
fn resolvent_positivity_on_random_sources() {
    let grid = resolvent_grid();
    let solver = ResolventSolver::new(&grid, 2.0, &FluxOptions::default()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let modes: Vec<(f64, f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.random::<f64>(),
                    rng.random_range(1..4) as f64,
                    rng.random_range(1..4) as f64,
                    rng.random::<f64>(),
                )
            })
            .collect();
        let psi = move |x: &[f64; 2]| {
            modes
                .iter()
                .map(|(a, kx, ky, ph)| {
                    let t = std::f64::consts::TAU;
                    a * (1.0 + (t * (kx * x[0] + ky * x[1] + ph)).sin())
                })
                .sum::<f64>()
        };
        let at_pockets = [rng.random::<f64>(), rng.random::<f64>()];
        let sol = solver.solve(psi, &at_pockets).unwrap();
        let min = sol
            .field
            .values
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(min >= -1e-10, "{min}");
        assert!(sol.max_flux_residual() <= 1e-8);
        assert!(sol.interior_residual <= 1e-9);
    }
}

/// Smooth on `U'`: equal to 1 near every pocket.
fn collapsed_bump(geometry: &Geometry<2>, x: &[f64; 2]) -> f64 {
    let d = geometry.nearest_pocket(x).map_or(1.0, |n| n.distance);
    let t = (d / 0.1).min(1.0);
    let cut = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    1.0 + 0.5 * cut * (std::f64::consts::TAU * x[0]).sin()
}

#[test]
fn resolvent_large_lambda() {
    let grid = resolvent_grid();
    let g = grid.geometry().clone();
    let psi = |x: &[f64; 2]| collapsed_bump(&g, x);
    let sup_err = |lambda: f64| {
        let sol =
            solve_resolvent(&grid, lambda, psi, &[1.0, 1.0], &FluxOptions::default()).unwrap();
        sol.nodes()
            .map(|(x, f)| {
                let inside = g.pockets().iter().any(|p| p.ball.contains(&x));
                if inside {
                    (lambda * f - 1.0).abs()
                } else {
                    (lambda * f - psi(&x)).abs()
                }
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (sup_err(1e3), sup_err(4e3));
    assert!(e1 <= 0.05 * 1.5, "{e1}");
    assert!(e2 < e1, "{e2} vs {e1}");
}

#[test]
fn resolvent_rejects_target_grid() {
    let grid = Grid::new(&disk_2d(), 64).unwrap();
    assert!(ResolventSolver::new(&grid, 1.0, &FluxOptions::default()).is_err());
}

#[test]
fn csv_export_skips_target() {
    let g = symmetric_1d();
    let grid = Grid::new(&g, 100).unwrap();
    let sol = solve_hitting_problem(&grid, &FluxOptions::default()).unwrap();
    let mut buf = Vec::new();
    sol.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("x0,u\n"));
    assert_eq!(text.lines().count(), 1 + 100 - 11);
}
