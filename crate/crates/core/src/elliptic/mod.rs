//! The boundary problem with unknown constant pocket values.
//!
//! Solutions are assembled by superposition: a particular solution with zero
//! wall data plus one harmonic lift per pocket, the lift weights fixed by the
//! integral flux condition at every pocket. Fluxes use the normal pointing
//! into the pocket.
//!
//! For the resolvent `λf − Af = ψ`, at the collapsed point `d_j` the generator
//! acts as `Af(d_j) = ½ g_j`, so `λ c_j − ½ g_j = ψ(d_j)` and therefore
//! `g_j = 2(λ c_j − ψ(d_j))`. Substituting into the flux condition
//! `∫⟨∇f, n⟩ dν_j + ½ g_j Vol(D_j) = 0` gives the linear system
//! `Σ_k [Φ_j(h_k) + λ Vol(D_j) δ_jk] c_k = ψ(d_j) Vol(D_j) − Φ_j(f̃)`
//! where `Φ_j` is the flux functional of pocket `j`.

mod closed_form;
mod grid;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use closed_form::{closed_form_1d, resolvent_coupling_1d, ClosedForm1d, Segment, SegmentEnd};
pub use grid::{Grid, GridStats, NodeClass, Wall};

use crate::error::{Error, Result};
use crate::point::{self, Point};
use grid::Operator;

/// Sample distances (in grid spacings) of the one-sided normal derivative.
const FLUX_OFFSETS: [f64; 4] = [3.0, 4.0, 5.0, 6.0];

/// Quadrature and flux-condition options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct FluxOptions {
    /// Boundary quadrature points per pocket in 2D.
    pub quadrature: usize,
    /// Multiplier on `Vol(D_k)` in the flux condition.
    pub stickiness: f64,
}

impl Default for FluxOptions {
    fn default() -> Self {
        Self {
            quadrature: 256,
            stickiness: 1.0,
        }
    }
}

/// Nodal values on a grid; known nodes carry the value of their wall.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
    pub wall_values: Vec<f64>,
}

impl GridField {
    fn assemble<const D: usize>(grid: &Grid<D>, unknowns: &[f64], wall_values: &[f64]) -> Self {
        let values = (0..grid.len())
            .map(|node| match grid.unknown_of(node) {
                Some(i) => unknowns[i],
                None => match grid.class(node) {
                    NodeClass::Excluded(w) => wall_values[grid.wall_index(w).unwrap()],
                    _ => unreachable!("unknown node without index"),
                },
            })
            .collect();
        Self {
            values,
            wall_values: wall_values.to_vec(),
        }
    }

    /// Sets every node from `f` (walls keep their stored values).
    pub fn from_fn<const D: usize>(
        grid: &Grid<D>,
        wall_values: &[f64],
        f: impl Fn(&Point<D>) -> f64,
    ) -> Self {
        let mut field = Self::assemble(grid, &vec![0.0; grid.unknowns()], wall_values);
        for i in 0..grid.unknowns() {
            let node = grid.node_of(i);
            field.values[node] = f(&grid.coords(node));
        }
        field
    }

    /// Cubic interpolation of the nodal values at `x`.
    pub fn interpolate<const D: usize>(&self, grid: &Grid<D>, x: &Point<D>) -> f64 {
        grid.cubic_stencil(x)
            .into_iter()
            .map(|(node, w)| w * self.values[node])
            .sum()
    }
}

/// Solves `λu − ½Δu = rhs` on the grid unknowns with constant Dirichlet data
/// `wall_values` (one per wall, pockets first, then `∂F`).
pub fn solve_dirichlet<const D: usize>(
    grid: &Grid<D>,
    rhs: impl Fn(&Point<D>) -> f64,
    wall_values: &[f64],
    lambda: f64,
) -> Result<GridField> {
    check_walls(grid, wall_values)?;
    let op = grid.operator(lambda)?;
    let f = sample_rhs(grid, &rhs);
    let u = op.solve_many(&[(f, wall_values.to_vec())])?.remove(0);
    Ok(GridField::assemble(grid, &u, wall_values))
}

fn check_walls<const D: usize>(grid: &Grid<D>, wall_values: &[f64]) -> Result<()> {
    if wall_values.len() != grid.wall_count() {
        return Err(Error::Config(format!(
            "expected {} wall values, got {}",
            grid.wall_count(),
            wall_values.len()
        )));
    }
    Ok(())
}

fn sample_rhs<const D: usize>(grid: &Grid<D>, rhs: &impl Fn(&Point<D>) -> f64) -> Vec<f64> {
    (0..grid.unknowns())
        .map(|i| rhs(&grid.coords(grid.node_of(i))))
        .collect()
}

/// Linear functional `u ↦ ∫_{∂D_k} ⟨∇u, n⟩ dν_k`.
#[derive(Debug, Clone)]
pub struct FluxFunctional {
    pocket: usize,
    wall: usize,
    wall_weight: f64,
    nodes: Vec<(usize, f64)>,
}

impl FluxFunctional {
    pub fn new<const D: usize>(grid: &Grid<D>, k: usize, quadrature: usize) -> Result<Self> {
        let geometry = grid.geometry();
        if k >= geometry.pockets().len() {
            return Err(Error::Domain(format!("no pocket {k}")));
        }
        let wall = grid.wall_index(Wall::Pocket(k)).unwrap();
        let ball = geometry.pocket(k).ball;
        let dx = grid.dx();
        let mut t = vec![0.0];
        t.extend(FLUX_OFFSETS.iter().map(|o| o * dx));
        let d = derivative_weights(&t);
        let mut wall_weight = 0.0;
        let mut acc = std::collections::BTreeMap::<usize, f64>::new();
        for (b, wq) in geometry.boundary_quadrature(k, quadrature) {
            let (v, rho) = ball.offset(&b);
            let out = point::scale(&v, 1.0 / rho);
            // ⟨∇u, n⟩ = −du/ds along the outward ray from the pocket
            wall_weight -= wq * d[0];
            for (s, ds) in t[1..].iter().zip(&d[1..]) {
                let q = point::axpy(*s, &out, &b);
                for (node, w) in grid.cubic_stencil(&q) {
                    if grid.unknown_of(node).is_none() {
                        return Err(Error::InsufficientStencil { pocket: k });
                    }
                    *acc.entry(node).or_insert(0.0) -= wq * ds * w;
                }
            }
        }
        Ok(Self {
            pocket: k,
            wall,
            wall_weight,
            nodes: acc.into_iter().collect(),
        })
    }

    pub fn pocket(&self) -> usize {
        self.pocket
    }

    pub fn apply(&self, field: &GridField) -> f64 {
        self.wall_weight * field.wall_values[self.wall]
            + self
                .nodes
                .iter()
                .map(|&(n, w)| w * field.values[n])
                .sum::<f64>()
    }
}

/// Derivative at 0 of the Lagrange basis on nodes `t`.
fn derivative_weights(t: &[f64]) -> Vec<f64> {
    (0..t.len())
        .map(|i| {
            if t[i] == 0.0 {
                return t.iter().filter(|&&tm| tm != 0.0).map(|tm| -1.0 / tm).sum();
            }
            let num: f64 = t
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != i && t[m] != 0.0)
                .map(|(_, tm)| -tm)
                .product();
            let den: f64 = t
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != i)
                .map(|(_, tm)| t[i] - tm)
                .product();
            num / den
        })
        .collect()
}

/// `∫_{∂D_k} ⟨∇u, n⟩ dν_k` with the default quadrature.
pub fn flux_integral<const D: usize>(grid: &Grid<D>, field: &GridField, k: usize) -> Result<f64> {
    Ok(FluxFunctional::new(grid, k, FluxOptions::default().quadrature)?.apply(field))
}

/// Grid solution of the hitting or resolvent problem.
#[derive(Debug, Clone)]
pub struct EllipticSolution<'g, const D: usize> {
    pub grid: &'g Grid<D>,
    pub field: GridField,
    /// Pocket values `c_k`.
    pub constants: Vec<f64>,
    pub lambda: Option<f64>,
    /// Boundary Laplacian values `g_k` (resolvent only).
    pub g: Option<Vec<f64>>,
    /// Flux-condition residual per pocket.
    pub flux_residuals: Vec<f64>,
    /// Relative max-norm residual of the assembled field in the discrete
    /// interior equation.
    pub interior_residual: f64,
    pub condition_number: f64,
    pub stickiness: f64,
}

/// Serializable digest of an [`EllipticSolution`].
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub constants: Vec<f64>,
    pub lambda: Option<f64>,
    pub g: Option<Vec<f64>>,
    pub flux_residuals: Vec<f64>,
    pub interior_residual: f64,
    pub condition_number: f64,
    pub stickiness: f64,
    pub grid: GridStats,
}

impl<const D: usize> EllipticSolution<'_, D> {
    /// Value at `x`: `c_k` on `D̄_k`, interpolated in `U`, undefined in `F̄`.
    pub fn eval(&self, x: &Point<D>) -> Option<f64> {
        let geometry = self.grid.geometry();
        if geometry.in_target(x) {
            return None;
        }
        for p in geometry.pockets() {
            if p.ball.contains(x) {
                return Some(self.constants[p.index]);
            }
        }
        Some(self.field.interpolate(self.grid, x))
    }

    /// Nodal values with `F̄` nodes skipped.
    pub fn nodes(&self) -> impl Iterator<Item = (Point<D>, f64)> + '_ {
        (0..self.grid.len())
            .filter(|&n| self.grid.class(n) != NodeClass::Excluded(Wall::Target))
            .map(|n| (self.grid.coords(n), self.field.values[n]))
    }

    pub fn max_flux_residual(&self) -> f64 {
        self.flux_residuals.iter().fold(0.0, |a, r| a.max(r.abs()))
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            constants: self.constants.clone(),
            lambda: self.lambda,
            g: self.g.clone(),
            flux_residuals: self.flux_residuals.clone(),
            interior_residual: self.interior_residual,
            condition_number: self.condition_number,
            stickiness: self.stickiness,
            grid: self.grid.stats(),
        }
    }

    /// CSV of `(x_0, .., x_{d-1}, u)` over the nodes outside `F̄`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..D).map(|a| format!("x{a}")).collect();
        writeln!(w, "{},u", header.join(","))?;
        for (x, u) in self.nodes() {
            for c in x {
                write!(w, "{c:.16e},")?;
            }
            writeln!(w, "{u:.16e}")?;
        }
        Ok(())
    }
}

/// Solves the coupling system; the 2-norm condition number rides along.
fn solve_coupling(k: DMatrix<f64>, b: DVector<f64>) -> Result<(Vec<f64>, f64)> {
    if k.nrows() == 0 {
        return Ok((Vec::new(), 1.0));
    }
    let sv = k.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    if !(min > 1e-13 * max) || !max.is_finite() {
        return Err(Error::SingularCouplingMatrix);
    }
    let c = k.lu().solve(&b).ok_or(Error::SingularCouplingMatrix)?;
    Ok((c.iter().copied().collect(), max / min))
}

fn flux_functionals<const D: usize>(
    grid: &Grid<D>,
    opts: &FluxOptions,
) -> Result<Vec<FluxFunctional>> {
    if !(opts.stickiness > 0.0 && opts.stickiness.is_finite()) {
        return Err(Error::Config("stickiness must be positive".into()));
    }
    (0..grid.geometry().pockets().len())
        .map(|k| FluxFunctional::new(grid, k, opts.quadrature.max(1)))
        .collect()
}

/// Lifts `h_k`: zero rhs, wall data `1` on `∂D_k` and `0` elsewhere.
fn lift_data<const D: usize>(grid: &Grid<D>) -> Vec<(Vec<f64>, Vec<f64>)> {
    let np = grid.geometry().pockets().len();
    (0..np)
        .map(|k| {
            let mut w = vec![0.0; grid.wall_count()];
            w[grid.wall_index(Wall::Pocket(k)).unwrap()] = 1.0;
            (vec![0.0; grid.unknowns()], w)
        })
        .collect()
}

fn combine(base: &[f64], lifts: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let mut u = base.to_vec();
    for (h, ck) in lifts.iter().zip(c) {
        for (ui, hi) in u.iter_mut().zip(h) {
            *ui += ck * hi;
        }
    }
    u
}

/// Mean hitting time problem: `½Δu = −1` in `U`, `u = 0` on `∂F`, `u = c_k`
/// on `∂D_k` with `∫⟨∇u, n⟩ dν_k = s·Vol(D_k)`.
pub fn solve_hitting_problem<'g, const D: usize>(
    grid: &'g Grid<D>,
    opts: &FluxOptions,
) -> Result<EllipticSolution<'g, D>> {
    let target = grid
        .wall_index(Wall::Target)
        .ok_or_else(|| Error::Config("hitting problem needs a target domain F".into()))?;
    let geometry = grid.geometry();
    let np = geometry.pockets().len();
    let fluxes = flux_functionals(grid, opts)?;
    let op = grid.operator(0.0)?;
    let ones = vec![1.0; grid.unknowns()];
    let mut data = vec![(ones.clone(), vec![0.0; grid.wall_count()])];
    data.extend(lift_data(grid));
    let mut sols = op.solve_many(&data)?;
    let lifts = sols.split_off(1);
    let base = sols.remove(0);

    let base_field = GridField::assemble(grid, &base, &data[0].1);
    let lift_fields: Vec<GridField> = lifts
        .iter()
        .zip(&data[1..])
        .map(|(h, (_, w))| GridField::assemble(grid, h, w))
        .collect();
    let k = DMatrix::from_fn(np, np, |j, m| fluxes[j].apply(&lift_fields[m]));
    let b = DVector::from_fn(np, |j, _| {
        opts.stickiness * geometry.pocket(j).volume() - fluxes[j].apply(&base_field)
    });
    let (c, cond) = solve_coupling(k, b)?;

    let mut walls = vec![0.0; grid.wall_count()];
    for (j, cj) in c.iter().enumerate() {
        walls[grid.wall_index(Wall::Pocket(j)).unwrap()] = *cj;
    }
    walls[target] = 0.0;
    let u = combine(&base, &lifts, &c);
    let interior_residual = op.residual(&u, &ones, &walls);
    let field = GridField::assemble(grid, &u, &walls);
    let flux_residuals = fluxes
        .iter()
        .enumerate()
        .map(|(j, f)| f.apply(&field) - opts.stickiness * geometry.pocket(j).volume())
        .collect();
    Ok(EllipticSolution {
        grid,
        field,
        constants: c,
        lambda: None,
        g: None,
        flux_residuals,
        interior_residual,
        condition_number: cond,
        stickiness: opts.stickiness,
    })
}

/// Factorized resolvent problem for repeated right-hand sides at fixed `λ`.
pub struct ResolventSolver<'g, const D: usize> {
    grid: &'g Grid<D>,
    op: Operator,
    lambda: f64,
    opts: FluxOptions,
    fluxes: Vec<FluxFunctional>,
    lifts: Vec<Vec<f64>>,
    coupling: DMatrix<f64>,
}

impl<'g, const D: usize> ResolventSolver<'g, D> {
    /// The grid must not carry a target wall: the resolvent lives on all of `U'`.
    pub fn new(grid: &'g Grid<D>, lambda: f64, opts: &FluxOptions) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!(
                "resolvent needs lambda > 0, got {lambda}"
            )));
        }
        if grid.wall_index(Wall::Target).is_some() {
            return Err(Error::Config(
                "resolvent grid must be built without the target domain".into(),
            ));
        }
        let geometry = grid.geometry();
        let np = geometry.pockets().len();
        let fluxes = flux_functionals(grid, opts)?;
        let op = grid.operator(lambda)?;
        let data = lift_data(grid);
        let lifts = op.solve_many(&data)?;
        let fields: Vec<GridField> = lifts
            .iter()
            .zip(&data)
            .map(|(h, (_, w))| GridField::assemble(grid, h, w))
            .collect();
        let coupling = DMatrix::from_fn(np, np, |j, m| {
            let diag = if j == m {
                opts.stickiness * lambda * geometry.pocket(j).volume()
            } else {
                0.0
            };
            fluxes[j].apply(&fields[m]) + diag
        });
        Ok(Self {
            grid,
            op,
            lambda,
            opts: *opts,
            fluxes,
            lifts,
            coupling,
        })
    }

    /// The pocket coupling matrix `Φ_j(h_k) + s·λ·Vol(D_j)·δ_jk`.
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    /// Solves `λf − Af = ψ` with `ψ` given on `U` and by its values at the
    /// collapsed points.
    pub fn solve(
        &self,
        psi: impl Fn(&Point<D>) -> f64,
        psi_pockets: &[f64],
    ) -> Result<EllipticSolution<'g, D>> {
        let grid = self.grid;
        let geometry = grid.geometry();
        let np = geometry.pockets().len();
        if psi_pockets.len() != np {
            return Err(Error::Config(format!(
                "expected {np} pocket values of psi, got {}",
                psi_pockets.len()
            )));
        }
        let s = self.opts.stickiness;
        let rhs = sample_rhs(grid, &psi);
        let zero = vec![0.0; grid.wall_count()];
        let base = self
            .op
            .solve_many(&[(rhs.clone(), zero.clone())])?
            .remove(0);
        let base_field = GridField::assemble(grid, &base, &zero);
        let b = DVector::from_fn(np, |j, _| {
            let vol = geometry.pocket(j).volume();
            s * psi_pockets[j] * vol - self.fluxes[j].apply(&base_field)
        });
        let (c, cond) = solve_coupling(self.coupling.clone(), b)?;
        let mut walls = zero;
        for (j, cj) in c.iter().enumerate() {
            walls[grid.wall_index(Wall::Pocket(j)).unwrap()] = *cj;
        }
        let u = combine(&base, &self.lifts, &c);
        let interior_residual = self.op.residual(&u, &rhs, &walls);
        let field = GridField::assemble(grid, &u, &walls);
        let g: Vec<f64> = c
            .iter()
            .zip(psi_pockets)
            .map(|(cj, pj)| 2.0 * (self.lambda * cj - pj))
            .collect();
        let flux_residuals = self
            .fluxes
            .iter()
            .enumerate()
            .map(|(j, f)| f.apply(&field) + 0.5 * s * g[j] * geometry.pocket(j).volume())
            .collect();
        Ok(EllipticSolution {
            grid,
            field,
            constants: c,
            lambda: Some(self.lambda),
            g: Some(g),
            flux_residuals,
            interior_residual,
            condition_number: cond,
            stickiness: s,
        })
    }
}

/// One-shot [`ResolventSolver`].
pub fn solve_resolvent<'g, const D: usize>(
    grid: &'g Grid<D>,
    lambda: f64,
    psi: impl Fn(&Point<D>) -> f64,
    psi_pockets: &[f64],
    opts: &FluxOptions,
) -> Result<EllipticSolution<'g, D>> {
    ResolventSolver::new(grid, lambda, opts)?.solve(psi, psi_pockets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_weights_exact_on_quartics() {
        let t = [0.0, 3.0, 4.0, 5.0, 6.0];
        let d = derivative_weights(&t);
        for p in 0..5 {
            let got: f64 = t.iter().zip(&d).map(|(x, w)| w * x.powi(p)).sum();
            let want = if p == 1 { 1.0 } else { 0.0 };
            assert!((got - want).abs() < 1e-12, "degree {p}: {got}");
        }
    }
}
