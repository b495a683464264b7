//! Exact piecewise-quadratic solution of the hitting problem on the circle.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Ball, Geometry};
use crate::point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentEnd {
    Pocket(usize),
    Target,
}

/// One component of `U`: the arc `[start, start + length]` (mod 1).
///
/// On it `u(s) = −s² + a1·s + a0` with `s` measured from `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub start: f64,
    pub length: f64,
    pub left: SegmentEnd,
    pub right: SegmentEnd,
    pub a0: f64,
    pub a1: f64,
}

impl Segment {
    pub fn value(&self, s: f64) -> f64 {
        -s * s + self.a1 * s + self.a0
    }

    pub fn slope(&self, s: f64) -> f64 {
        -2.0 * s + self.a1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedForm1d {
    pub segments: Vec<Segment>,
    /// Pocket values `c_k`.
    pub constants: Vec<f64>,
    pub stickiness: f64,
    #[serde(skip)]
    geometry: Geometry<1>,
}

impl ClosedForm1d {
    /// Exact value at `x`; zero on `F̄`.
    pub fn eval(&self, x: f64) -> f64 {
        let p = [x];
        if self.geometry.in_target(&p) {
            return 0.0;
        }
        for pk in self.geometry.pockets() {
            if pk.ball.contains(&p) {
                return self.constants[pk.index];
            }
        }
        for seg in &self.segments {
            let s = point::wrap_coord(x - seg.start);
            if s <= seg.length {
                return seg.value(s);
            }
        }
        unreachable!("every point lies in a pocket, F or a segment")
    }

    /// `∫⟨∇u, n⟩ dν_k − s·Vol(D_k)` for every pocket, from the coefficients.
    pub fn flux_residuals(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self
            .geometry
            .pockets()
            .iter()
            .map(|p| -self.stickiness * p.volume())
            .collect();
        for seg in &self.segments {
            if let SegmentEnd::Pocket(k) = seg.left {
                r[k] -= seg.slope(0.0);
            }
            if let SegmentEnd::Pocket(k) = seg.right {
                r[k] += seg.slope(seg.length);
            }
        }
        r
    }
}

/// Arcs of the circle between consecutive walls, in order of their start.
fn arcs(walls: &[(SegmentEnd, Ball<1>)]) -> Vec<(f64, f64, SegmentEnd, SegmentEnd)> {
    let mut order: Vec<usize> = (0..walls.len()).collect();
    let left = |b: &Ball<1>| point::wrap_coord(b.center[0] - b.radius);
    order.sort_by(|&i, &j| left(&walls[i].1).total_cmp(&left(&walls[j].1)));
    (0..order.len())
        .map(|m| {
            let (e0, b0) = walls[order[m]];
            let (e1, b1) = walls[order[(m + 1) % order.len()]];
            let start = point::wrap_coord(b0.center[0] + b0.radius);
            let mut length = point::wrap_coord(left(&b1) - start);
            if order.len() == 1 {
                length = 1.0 - 2.0 * b0.radius;
            }
            (start, length, e0, e1)
        })
        .collect()
}

/// Exact solution of `½u″ = −1` off the walls, `u = 0` on `∂F`, `u = c_k` on
/// `∂D_k` and `u′` jumps matching `s·Vol(D_k)` at every pocket.
pub fn closed_form_1d(geometry: &Geometry<1>, stickiness: f64) -> Result<ClosedForm1d> {
    let target = *geometry
        .target()
        .ok_or_else(|| Error::Config("closed form needs a target interval F".into()))?;
    if !(stickiness > 0.0 && stickiness.is_finite()) {
        return Err(Error::Config("stickiness must be positive".into()));
    }
    let np = geometry.pockets().len();
    let mut walls: Vec<(SegmentEnd, Ball<1>)> = geometry
        .pockets()
        .iter()
        .map(|p| (SegmentEnd::Pocket(p.index), p.ball))
        .collect();
    walls.push((SegmentEnd::Target, target));
    let arcs = arcs(&walls);

    // u(s) = α + (β − α)s/L + s(L − s): u′(L) − u′(0) at each pocket end
    let mut m = DMatrix::<f64>::zeros(np, np);
    let mut rhs = DVector::from_fn(np, |k, _| stickiness * geometry.pocket(k).volume());
    for &(_, len, a, b) in &arcs {
        for (this, other) in [(a, b), (b, a)] {
            if let SegmentEnd::Pocket(j) = this {
                m[(j, j)] += 1.0 / len;
                if let SegmentEnd::Pocket(o) = other {
                    m[(j, o)] -= 1.0 / len;
                }
                rhs[j] += len;
            }
        }
    }
    let c = m.lu().solve(&rhs).ok_or(Error::SingularCouplingMatrix)?;
    let value = |e: SegmentEnd| match e {
        SegmentEnd::Pocket(k) => c[k],
        SegmentEnd::Target => 0.0,
    };
    let segments = arcs
        .iter()
        .map(|&(start, length, left, right)| {
            let (alpha, beta) = (value(left), value(right));
            Segment {
                start,
                length,
                left,
                right,
                a0: alpha,
                a1: (beta - alpha) / length + length,
            }
        })
        .collect();
    Ok(ClosedForm1d {
        segments,
        constants: c.iter().copied().collect(),
        stickiness,
        geometry: geometry.clone(),
    })
}

/// Exact pocket coupling matrix of the 1D resolvent problem (target ignored):
/// `μ coth(μL)` per adjacent arc on the diagonal plus `s·λ·Vol`, `−μ/sinh(μL)`
/// between the two ends of an arc, `μ = √(2λ)`.
pub fn resolvent_coupling_1d(
    geometry: &Geometry<1>,
    lambda: f64,
    stickiness: f64,
) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "resolvent needs lambda > 0, got {lambda}"
        )));
    }
    let np = geometry.pockets().len();
    let walls: Vec<(SegmentEnd, Ball<1>)> = geometry
        .pockets()
        .iter()
        .map(|p| (SegmentEnd::Pocket(p.index), p.ball))
        .collect();
    let mu = (2.0 * lambda).sqrt();
    let mut k = DMatrix::from_fn(np, np, |j, m| {
        if j == m {
            stickiness * lambda * geometry.pocket(j).volume()
        } else {
            0.0
        }
    });
    if np == 0 {
        return Ok(k);
    }
    for (_, len, a, b) in arcs(&walls) {
        let (SegmentEnd::Pocket(p), SegmentEnd::Pocket(q)) = (a, b) else {
            unreachable!()
        };
        let x = mu * len;
        k[(p, p)] += mu / x.tanh();
        k[(q, q)] += mu / x.tanh();
        k[(p, q)] -= mu / x.sinh();
        k[(q, p)] -= mu / x.sinh();
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric() -> Geometry<1> {
        Geometry::new(vec![Ball::new([0.1], 0.1)], Some(Ball::new([0.6], 0.05))).unwrap()
    }

    #[test]
    fn symmetric_case() {
        let cf = closed_form_1d(&symmetric(), 1.0).unwrap();
        assert!((cf.constants[0] - 0.1575).abs() < 1e-14);
        let from_pocket = cf
            .segments
            .iter()
            .find(|s| s.left == SegmentEnd::Pocket(0))
            .unwrap();
        assert!((from_pocket.a1 + 0.1).abs() < 1e-14);
        assert!((from_pocket.a0 - 0.1575).abs() < 1e-14);
        assert!(cf.flux_residuals()[0].abs() < 1e-14);
        assert!(cf.eval(0.55).abs() < 1e-14);
        assert!(cf.eval(0.65).abs() < 1e-14);
        assert!((cf.eval(0.2) - 0.1575).abs() < 1e-14);
    }

    #[test]
    fn doubled_stickiness() {
        let cf = closed_form_1d(&symmetric(), 2.0).unwrap();
        assert!((cf.constants[0] - 0.35 * 0.55).abs() < 1e-14);
    }

    #[test]
    fn vanishing_pocket_limit() {
        for l in [1e-3, 1e-5] {
            let g = Geometry::new(
                vec![Ball::new([0.1], l / 2.0)],
                Some(Ball::new([0.6], 0.5 - l / 2.0 - 0.35)),
            )
            .unwrap();
            let cf = closed_form_1d(&g, 1.0).unwrap();
            let big_l = cf.segments[0].length;
            assert!((cf.constants[0] - big_l * big_l).abs() < l, "{l}");
        }
    }

    #[test]
    fn two_pockets_residuals_vanish() {
        let g = Geometry::new(
            vec![Ball::new([0.1], 0.05), Ball::new([0.35], 0.08)],
            Some(Ball::new([0.7], 0.1)),
        )
        .unwrap();
        let cf = closed_form_1d(&g, 1.0).unwrap();
        for r in cf.flux_residuals() {
            assert!(r.abs() < 1e-13);
        }
        for s in &cf.segments {
            let end = |e| match e {
                SegmentEnd::Pocket(k) => cf.constants[k],
                SegmentEnd::Target => 0.0,
            };
            assert!((s.value(0.0) - end(s.left)).abs() < 1e-14);
            assert!((s.value(s.length) - end(s.right)).abs() < 1e-14);
        }
    }

    #[test]
    fn resolvent_coupling_diagonally_dominant() {
        let g = Geometry::new(vec![Ball::new([0.1], 0.05), Ball::new([0.5], 0.1)], None).unwrap();
        for lambda in [1e-3, 1.0, 1e3] {
            let k = resolvent_coupling_1d(&g, lambda, 1.0).unwrap();
            for j in 0..2 {
                let off: f64 = (0..2).filter(|&m| m != j).map(|m| k[(j, m)].abs()).sum();
                assert!(k[(j, j)] > off);
            }
        }
    }
}
