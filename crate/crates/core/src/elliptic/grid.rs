//! Regular torus grid with Shortley–Weller arms at pocket and target walls.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::{Ball, Geometry};
use crate::point::{self, Point};

/// Nodes closer than this fraction of `dx` to a wall are treated as lying on it.
const SNAP: f64 = 1e-3;

/// One of the Dirichlet walls of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    Pocket(usize),
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Unknown node with a full regular stencil.
    Interior,
    /// Unknown node with at least one arm cut by pocket `k`.
    PocketBoundary(usize),
    /// Unknown node with at least one arm cut by `∂F`.
    TargetBoundary,
    /// Known node inside (or on) a wall.
    Excluded(Wall),
}

/// Neighbor along one stencil arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Arm {
    Node(usize),
    /// Wall `w` reached at fraction `theta ∈ (0, 1]` of the spacing.
    Wall {
        wall: usize,
        theta: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Grid<const D: usize> {
    geometry: Geometry<D>,
    n: usize,
    dx: f64,
    walls: Vec<(Wall, Ball<D>)>,
    class: Vec<NodeClass>,
    /// Node → unknown index (`usize::MAX` for known nodes).
    unknown_of: Vec<usize>,
    /// Unknown index → node.
    nodes: Vec<usize>,
    /// Per unknown, `[left, right]` arms for every axis.
    arms: Vec<[[Arm; 2]; D]>,
}

/// Summary of a grid for reports.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GridStats {
    pub nodes_per_axis: usize,
    pub dx: f64,
    pub unknowns: usize,
    pub irregular: usize,
    pub min_theta: f64,
}

impl<const D: usize> Grid<D> {
    /// Grid of `n` nodes per axis (spacing `1/n`) with walls at every pocket
    /// boundary and at `∂F` when present.
    pub fn new(geometry: &Geometry<D>, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::Domain(format!(
                "grid needs at least 8 nodes per axis, got {n}"
            )));
        }
        let dx = 1.0 / n as f64;
        let mut walls: Vec<(Wall, Ball<D>)> = geometry
            .pockets()
            .iter()
            .map(|p| (Wall::Pocket(p.index), p.ball))
            .collect();
        if let Some(f) = geometry.target() {
            walls.push((Wall::Target, *f));
        }
        let total = n.pow(D as u32);
        let mut class = vec![NodeClass::Interior; total];
        let mut inside = vec![usize::MAX; total];
        let mut unknown_of = vec![usize::MAX; total];
        let mut nodes = Vec::new();
        for node in 0..total {
            let x = node_coords::<D>(node, n, dx);
            if let Some(w) = walls
                .iter()
                .position(|(_, b)| b.signed_distance(&x) <= SNAP * dx)
            {
                inside[node] = w;
                class[node] = NodeClass::Excluded(walls[w].0);
            } else {
                unknown_of[node] = nodes.len();
                nodes.push(node);
            }
        }
        let mut arms = Vec::with_capacity(nodes.len());
        for &node in &nodes {
            let x = node_coords::<D>(node, n, dx);
            let mut a = [[Arm::Node(0); 2]; D];
            for (axis, arms_axis) in a.iter_mut().enumerate() {
                for (side, sign) in [(0, -1.0), (1, 1.0)] {
                    let nb = neighbor::<D>(node, n, axis, sign < 0.0);
                    arms_axis[side] = if inside[nb] == usize::MAX {
                        Arm::Node(unknown_of[nb])
                    } else {
                        let w = inside[nb];
                        let theta = axis_hit(&walls[w].1, &x, axis, sign, dx).unwrap_or(1.0);
                        if matches!(class[node], NodeClass::Interior) {
                            class[node] = match walls[w].0 {
                                Wall::Pocket(k) => NodeClass::PocketBoundary(k),
                                Wall::Target => NodeClass::TargetBoundary,
                            };
                        }
                        Arm::Wall { wall: w, theta }
                    };
                }
            }
            arms.push(a);
        }
        Ok(Self {
            geometry: geometry.clone(),
            n,
            dx,
            walls,
            class,
            unknown_of,
            nodes,
            arms,
        })
    }

    pub fn geometry(&self) -> &Geometry<D> {
        &self.geometry
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    pub fn walls(&self) -> impl Iterator<Item = Wall> + '_ {
        self.walls.iter().map(|(w, _)| *w)
    }

    pub fn wall_count(&self) -> usize {
        self.walls.len()
    }

    pub(crate) fn wall_index(&self, wall: Wall) -> Option<usize> {
        self.walls.iter().position(|(w, _)| *w == wall)
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    pub fn coords(&self, node: usize) -> Point<D> {
        node_coords::<D>(node, self.n, self.dx)
    }

    pub(crate) fn unknown_of(&self, node: usize) -> Option<usize> {
        let u = self.unknown_of[node];
        (u != usize::MAX).then_some(u)
    }

    pub(crate) fn node_of(&self, unknown: usize) -> usize {
        self.nodes[unknown]
    }

    pub fn stats(&self) -> GridStats {
        let mut irregular = 0;
        let mut min_theta = 1.0f64;
        for a in &self.arms {
            let mut cut = false;
            for side in a.iter().flatten() {
                if let Arm::Wall { theta, .. } = side {
                    cut = true;
                    min_theta = min_theta.min(*theta);
                }
            }
            irregular += cut as usize;
        }
        GridStats {
            nodes_per_axis: self.n,
            dx: self.dx,
            unknowns: self.nodes.len(),
            irregular,
            min_theta,
        }
    }

    /// Tensor cubic Lagrange weights at `x`: `(node, weight)` over the
    /// surrounding `4^D` nodes.
    pub(crate) fn cubic_stencil(&self, x: &Point<D>) -> Vec<(usize, f64)> {
        let mut base = [0usize; D];
        let mut w = [[0.0; 4]; D];
        for a in 0..D {
            let t = point::wrap_coord(x[a]) / self.dx;
            let i = t.floor();
            let f = t - i;
            base[a] = (i as i64 - 1).rem_euclid(self.n as i64) as usize;
            w[a] = [
                -f * (f - 1.0) * (f - 2.0) / 6.0,
                (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
                -(f + 1.0) * f * (f - 2.0) / 2.0,
                (f + 1.0) * f * (f - 1.0) / 6.0,
            ];
        }
        let count = 4usize.pow(D as u32);
        let mut out = Vec::with_capacity(count);
        for m in 0..count {
            let mut node = 0;
            let mut stride = 1;
            let mut weight = 1.0;
            let mut r = m;
            for a in 0..D {
                let o = r % 4;
                r /= 4;
                node += ((base[a] + o) % self.n) * stride;
                stride *= self.n;
                weight *= w[a][o];
            }
            out.push((node, weight));
        }
        out
    }

    /// Assembles `λu − ½Δu` over the unknowns.
    pub(crate) fn operator(&self, lambda: f64) -> Result<Operator> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!(
                "lambda {lambda} must be finite and >= 0"
            )));
        }
        if lambda == 0.0 && self.walls.is_empty() {
            return Err(Error::SingularSystem(
                "lambda = 0 with no Dirichlet nodes".into(),
            ));
        }
        let m = self.nodes.len();
        if m == 0 {
            return Err(Error::SingularSystem("grid has no unknown nodes".into()));
        }
        let dx2 = self.dx * self.dx;
        let mut rows = Vec::with_capacity(m);
        let mut triplets = Vec::with_capacity(m * (2 * D + 1));
        for (i, arms) in self.arms.iter().enumerate() {
            let mut diag = lambda;
            let mut cols = Vec::with_capacity(2 * D);
            let mut walls = Vec::new();
            for pair in arms {
                let t = [arm_theta(&pair[0]), arm_theta(&pair[1])];
                let s = 1.0 / ((t[0] + t[1]) * dx2);
                diag += s * (1.0 / t[0] + 1.0 / t[1]);
                for (arm, th) in pair.iter().zip(t) {
                    let c = -s / th;
                    match *arm {
                        Arm::Node(j) => cols.push((j, c)),
                        Arm::Wall { wall, .. } => walls.push((wall, c)),
                    }
                }
            }
            triplets.push(Triplet::new(i, i, diag));
            for &(j, c) in &cols {
                triplets.push(Triplet::new(i, j, c));
            }
            rows.push(Row { diag, cols, walls });
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &triplets)
            .map_err(|e| Error::SingularSystem(format!("assembly failed: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("factorization failed: {e:?}")))?;
        Ok(Operator { rows, lu })
    }
}

pub(crate) struct Row {
    diag: f64,
    cols: Vec<(usize, f64)>,
    walls: Vec<(usize, f64)>,
}

/// Factorized discrete operator over the unknowns.
pub(crate) struct Operator {
    rows: Vec<Row>,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

/// Relative residual accepted from the direct solve.
pub(crate) const SOLVE_TOL: f64 = 1e-10;

impl Operator {
    /// Right-hand side after moving the wall values across.
    fn load(&self, rhs: &[f64], wall_values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(rhs)
            .map(|(r, &f)| {
                f - r
                    .walls
                    .iter()
                    .map(|&(w, c)| c * wall_values[w])
                    .sum::<f64>()
            })
            .collect()
    }

    /// Max-norm residual of `A u − b` relative to the max norm of `b`.
    pub(crate) fn residual(&self, u: &[f64], rhs: &[f64], wall_values: &[f64]) -> f64 {
        let b = self.load(rhs, wall_values);
        let scale = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return self.abs_residual(u, &b);
        }
        self.abs_residual(u, &b) / scale
    }

    fn abs_residual(&self, u: &[f64], b: &[f64]) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let au = r.diag * u[i] + r.cols.iter().map(|&(j, c)| c * u[j]).sum::<f64>();
                (au - b[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Solves for several `(rhs, wall values)` pairs at once.
    pub(crate) fn solve_many(&self, data: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<Vec<f64>>> {
        let m = self.rows.len();
        let loads: Vec<Vec<f64>> = data.iter().map(|(f, w)| self.load(f, w)).collect();
        let b = Mat::<f64>::from_fn(m, data.len(), |i, j| loads[j][i]);
        let x = self.lu.solve(&b);
        let mut out = Vec::with_capacity(data.len());
        for (j, (f, w)) in data.iter().enumerate() {
            let u: Vec<f64> = (0..m).map(|i| x[(i, j)]).collect();
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularSystem("non-finite solution".into()));
            }
            let res = self.residual(&u, f, w);
            if res > SOLVE_TOL {
                return Err(Error::SingularSystem(format!(
                    "relative residual {res:.3e} above {SOLVE_TOL:e}"
                )));
            }
            out.push(u);
        }
        Ok(out)
    }
}

fn arm_theta(arm: &Arm) -> f64 {
    match arm {
        Arm::Node(_) => 1.0,
        Arm::Wall { theta, .. } => *theta,
    }
}

fn node_coords<const D: usize>(node: usize, n: usize, dx: f64) -> Point<D> {
    let mut x = [0.0; D];
    let mut r = node;
    for c in x.iter_mut() {
        *c = (r % n) as f64 * dx;
        r /= n;
    }
    x
}

fn neighbor<const D: usize>(node: usize, n: usize, axis: usize, left: bool) -> usize {
    let stride = n.pow(axis as u32);
    let i = (node / stride) % n;
    let j = if left { (i + n - 1) % n } else { (i + 1) % n };
    node - i * stride + j * stride
}

/// Fraction of the spacing at which the axis ray from `x` first meets the sphere.
fn axis_hit<const D: usize>(
    ball: &Ball<D>,
    x: &Point<D>,
    axis: usize,
    sign: f64,
    dx: f64,
) -> Option<f64> {
    let (v, rho) = ball.offset(x);
    let r = ball.radius;
    // |v + sign·t·dx·e|² = r²  ⇒  (t dx)² + 2 sign v_a (t dx) + (ρ² − r²) = 0
    let b = sign * v[axis];
    let c = rho * rho - r * r;
    let disc = b * b - c;
    if b >= 0.0 || disc < 0.0 {
        return None;
    }
    let s = c.max(0.0) / (disc.sqrt() - b);
    let theta = s / dx;
    (theta > 0.0 && theta <= 1.0 + 1e-12).then(|| theta.min(1.0))
}
