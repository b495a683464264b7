//! Pockets, target domain and metric queries on the flat torus.
//!
//! Every pocket is a ball of the torus metric: an interval in one dimension, a
//! disk in two. Balls give closed forms for volume, boundary measure, nearest
//! point projection and normals, which the rest of the lab leans on as oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{self, Point};

/// Tolerance for "this point lies on a boundary".
pub const ON_BOUNDARY_TOL: f64 = 1e-9;

/// A closed ball `{x : |x - center| <= radius}` of the torus metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball<const D: usize> {
    #[serde(with = "point_serde")]
    pub center: Point<D>,
    pub radius: f64,
}

impl<const D: usize> Ball<D> {
    pub fn new(center: Point<D>, radius: f64) -> Self {
        Self {
            center: point::wrap(&center),
            radius,
        }
    }

    /// d-dimensional volume.
    pub fn volume(&self) -> f64 {
        point::unit_ball_volume(D) * self.radius.powi(D as i32)
    }

    /// Total (d-1)-dimensional boundary measure; the counting measure (= 2) in 1D.
    pub fn boundary_measure(&self) -> f64 {
        D as f64 * point::unit_ball_volume(D) * self.radius.powi(D as i32 - 1)
    }

    /// Minimum-image offset from the center and its length.
    #[inline]
    pub fn offset(&self, x: &Point<D>) -> (Point<D>, f64) {
        let v = point::min_image(x, &self.center);
        (v, point::norm(&v))
    }

    /// Signed distance to the sphere: negative inside.
    #[inline]
    pub fn signed_distance(&self, x: &Point<D>) -> f64 {
        self.offset(x).1 - self.radius
    }

    #[inline]
    pub fn contains(&self, x: &Point<D>) -> bool {
        self.signed_distance(x) <= 0.0
    }
}

/// One pocket `D_k` of large diffusivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pocket<const D: usize> {
    pub index: usize,
    pub ball: Ball<D>,
}

impl<const D: usize> Pocket<D> {
    pub fn volume(&self) -> f64 {
        self.ball.volume()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.ball.boundary_measure()
    }

    pub fn radius(&self) -> f64 {
        self.ball.radius
    }

    pub fn center(&self) -> Point<D> {
        self.ball.center
    }
}

/// Region label of a point for a given shell width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    /// Farther than the shell width from every pocket.
    DeepU,
    /// Outer shell `D^{+δ}_k \ closure(D_k)`.
    Shell(usize),
    Boundary(usize),
    /// Inner layer `D_k \ D^{-δ}_k`.
    Pocket(usize),
    /// `D^{-δ}_k`.
    Inner(usize),
    TargetF,
}

/// Result of [`Geometry::nearest_pocket`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestPocket<const D: usize> {
    pub pocket: usize,
    /// Distance to the pocket boundary.
    pub distance: f64,
    pub inside: bool,
    /// Minimum-image offset from the pocket center.
    pub offset: Point<D>,
    /// Distance to the pocket center.
    pub rho: f64,
}

/// The torus `T^d` (side 1) with its pockets and optional target domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry<const D: usize> {
    pockets: Vec<Pocket<D>>,
    target: Option<Ball<D>>,
    min_gap: f64,
}

impl<const D: usize> Geometry<D> {
    pub fn new(pockets: Vec<Ball<D>>, target: Option<Ball<D>>) -> Result<Self> {
        let violations = Self::violations(&pockets, target.as_ref());
        if !violations.is_empty() {
            return Err(Error::InvalidGeometry(violations.join("; ")));
        }
        let pockets: Vec<Pocket<D>> = pockets
            .into_iter()
            .enumerate()
            .map(|(index, b)| Pocket {
                index,
                ball: Ball::new(b.center, b.radius),
            })
            .collect();
        let target = target.map(|b| Ball::new(b.center, b.radius));
        let mut balls: Vec<Ball<D>> = pockets.iter().map(|p| p.ball).collect();
        balls.extend(target);
        let mut min_gap = f64::INFINITY;
        for i in 0..balls.len() {
            for j in i + 1..balls.len() {
                min_gap = min_gap.min(gap(&balls[i], &balls[j]));
            }
        }
        Ok(Self {
            pockets,
            target,
            min_gap,
        })
    }

    /// Lists every violated construction constraint; empty when the geometry is valid.
    pub fn violations(pockets: &[Ball<D>], target: Option<&Ball<D>>) -> Vec<String> {
        let mut out = Vec::new();
        if !(1..=2).contains(&D) {
            out.push(format!("dimension {D} unsupported (expected 1 or 2)"));
        }
        let named: Vec<(String, &Ball<D>)> = pockets
            .iter()
            .enumerate()
            .map(|(k, b)| (format!("pocket {k}"), b))
            .chain(target.map(|b| ("target".to_string(), b)))
            .collect();
        for (name, b) in &named {
            if b.center.iter().any(|c| !c.is_finite()) {
                out.push(format!("{name}: center must be finite"));
            }
            if !(b.radius > 0.0 && b.radius < 0.5) {
                out.push(format!("{name}: radius {} outside (0, 0.5)", b.radius));
            }
        }
        for i in 0..pockets.len() {
            for j in i + 1..pockets.len() {
                if gap(&pockets[i], &pockets[j]) <= 0.0 {
                    out.push(format!("pockets {i},{j} closures intersect"));
                }
            }
            if let Some(t) = target {
                if gap(&pockets[i], t) <= 0.0 {
                    out.push(format!("target closure intersects pocket {i}"));
                }
            }
        }
        out
    }

    pub fn dimension(&self) -> usize {
        D
    }

    pub fn pockets(&self) -> &[Pocket<D>] {
        &self.pockets
    }

    pub fn pocket(&self, k: usize) -> &Pocket<D> {
        &self.pockets[k]
    }

    pub fn target(&self) -> Option<&Ball<D>> {
        self.target.as_ref()
    }

    /// The same pockets with the target domain removed.
    pub fn without_target(&self) -> Self {
        let balls = self.pockets.iter().map(|p| p.ball).collect();
        Self::new(balls, None).expect("subset of a valid geometry is valid")
    }

    /// Smallest gap between the closures of any two of the pockets and `F`.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// Exclusive upper bound on admissible shell widths: `min(gap/2, min r/2)`.
    pub fn max_delta(&self) -> f64 {
        let r_min = self
            .pockets
            .iter()
            .map(Pocket::radius)
            .fold(f64::INFINITY, f64::min);
        (0.5 * self.min_gap).min(0.5 * r_min)
    }

    pub fn check_delta(&self, delta: f64) -> Result<()> {
        let bound = self.max_delta();
        if !(delta > 0.0 && delta < bound) {
            return Err(Error::DeltaTooLarge { delta, bound });
        }
        Ok(())
    }

    /// Nearest pocket boundary. `None` when there are no pockets.
    #[inline]
    pub fn nearest_pocket(&self, x: &Point<D>) -> Option<NearestPocket<D>> {
        let mut best: Option<NearestPocket<D>> = None;
        for p in &self.pockets {
            let (offset, rho) = p.ball.offset(x);
            let distance = (rho - p.ball.radius).abs();
            if best.is_none_or(|b| distance < b.distance) {
                best = Some(NearestPocket {
                    pocket: p.index,
                    distance,
                    inside: rho < p.ball.radius,
                    offset,
                    rho,
                });
            }
        }
        best
    }

    /// Nearest point `θ(x)` on the boundary of the nearest pocket.
    pub fn project(&self, x: &Point<D>) -> Result<Point<D>> {
        let near = self
            .nearest_pocket(x)
            .ok_or_else(|| Error::Domain("geometry has no pockets".into()))?;
        let ball = self.pockets[near.pocket].ball;
        let cut = near.offset.iter().any(|c| c.abs() >= 0.5 - 1e-12);
        if near.rho < 1e-12 || cut {
            return Err(Error::AmbiguousProjection {
                pocket: near.pocket,
            });
        }
        let p = point::axpy(ball.radius / near.rho, &near.offset, &ball.center);
        Ok(point::wrap(&p))
    }

    /// Unit normal at `p` on the boundary of pocket `k`, pointing into the pocket.
    pub fn unit_normal(&self, k: usize, p: &Point<D>) -> Result<Point<D>> {
        let ball = self.pockets[k].ball;
        let (v, rho) = ball.offset(p);
        let offset = rho - ball.radius;
        if offset.abs() > ON_BOUNDARY_TOL {
            return Err(Error::NotOnBoundary { pocket: k, offset });
        }
        Ok(point::scale(&v, -1.0 / rho))
    }

    /// Maps a uniform variate `u ∈ [0, 1)` to a point on the boundary of pocket
    /// `k`, uniform under the normalized boundary measure. In 1D `u < 1/2`
    /// selects the left endpoint; in 2D `u` is the angle in turns.
    pub fn boundary_sample(&self, k: usize, u: f64) -> Point<D> {
        let ball = self.pockets[k].ball;
        let dir = boundary_direction::<D>(u);
        point::wrap(&point::axpy(ball.radius, &dir, &ball.center))
    }

    /// Inverse of [`boundary_sample`](Self::boundary_sample) up to the 1D atoms:
    /// the coordinate in `[0, 1)` of the boundary point nearest `p`.
    pub fn boundary_param(&self, k: usize, p: &Point<D>) -> f64 {
        let (v, _) = self.pockets[k].ball.offset(p);
        match D {
            1 => {
                if v[0] < 0.0 {
                    0.25
                } else {
                    0.75
                }
            }
            _ => {
                let turns = v[1].atan2(v[0]) / std::f64::consts::TAU;
                point::wrap_coord(turns)
            }
        }
    }

    /// Quadrature nodes and weights for the boundary measure of pocket `k`:
    /// the two endpoints with unit weights in 1D, `m` equispaced points
    /// (trapezoid rule) in 2D.
    pub fn boundary_quadrature(&self, k: usize, m: usize) -> Vec<(Point<D>, f64)> {
        let ball = self.pockets[k].ball;
        match D {
            1 => vec![
                (self.boundary_sample(k, 0.25), 1.0),
                (self.boundary_sample(k, 0.75), 1.0),
            ],
            _ => {
                let w = ball.boundary_measure() / m as f64;
                (0..m)
                    .map(|i| (self.boundary_sample(k, i as f64 / m as f64), w))
                    .collect()
            }
        }
    }

    pub fn in_target(&self, x: &Point<D>) -> bool {
        self.target.is_some_and(|t| t.contains(x))
    }

    /// Region label of `x` for shell width `delta`.
    pub fn classify(&self, x: &Point<D>, delta: f64) -> Result<RegionTag> {
        self.check_delta(delta)?;
        Ok(self.classify_unchecked(x, delta))
    }

    /// [`classify`](Self::classify) without the shell-width check, for hot loops
    /// that validated `delta` once.
    #[inline]
    pub fn classify_unchecked(&self, x: &Point<D>, delta: f64) -> RegionTag {
        self.region_of(x, self.nearest_pocket(x).as_ref(), delta)
    }

    /// Region label from a precomputed [`nearest_pocket`](Self::nearest_pocket) result.
    #[inline]
    pub fn region_of(
        &self,
        x: &Point<D>,
        near: Option<&NearestPocket<D>>,
        delta: f64,
    ) -> RegionTag {
        if self.in_target(x) {
            return RegionTag::TargetF;
        }
        let Some(near) = near else {
            return RegionTag::DeepU;
        };
        let k = near.pocket;
        if near.distance <= 1e-12 {
            RegionTag::Boundary(k)
        } else if near.inside {
            if near.distance > delta {
                RegionTag::Inner(k)
            } else {
                RegionTag::Pocket(k)
            }
        } else if near.distance < delta {
            RegionTag::Shell(k)
        } else {
            RegionTag::DeepU
        }
    }
}

/// Gap between the closures of two balls.
fn gap<const D: usize>(a: &Ball<D>, b: &Ball<D>) -> f64 {
    point::torus_dist(&a.center, &b.center) - a.radius - b.radius
}

#[inline]
pub(crate) fn boundary_direction<const D: usize>(u: f64) -> Point<D> {
    let mut dir = [0.0; D];
    match D {
        1 => dir[0] = if u < 0.5 { -1.0 } else { 1.0 },
        _ => {
            let (s, c) = (std::f64::consts::TAU * u).sin_cos();
            dir[0] = c;
            dir[1] = s;
        }
    }
    dir
}

pub(crate) mod point_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(p: &[f64; D], s: S) -> Result<S::Ok, S::Error> {
        p.as_slice().serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(
        d: De,
    ) -> Result<[f64; D], De::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into().map_err(|v: Vec<f64>| {
            serde::de::Error::custom(format!("expected {D} coordinates, got {}", v.len()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn disk() -> Geometry<2> {
        Geometry::new(vec![Ball::new([0.5, 0.5], 0.15)], None).unwrap()
    }

    fn interval() -> Geometry<1> {
        Geometry::new(vec![Ball::new([0.1], 0.1)], Some(Ball::new([0.6], 0.05))).unwrap()
    }

    #[test]
    fn nearest_pocket_at_center() {
        let n = disk().nearest_pocket(&[0.5, 0.5]).unwrap();
        assert_eq!(n.pocket, 0);
        assert!(close(n.distance, 0.15, 1e-15));
        assert!(n.inside);
    }

    #[test]
    fn nearest_pocket_matches_sampled_boundary() {
        let g = disk();
        let x = [0.9, 0.9];
        let brute = (0..10_000)
            .map(|i| point::torus_dist(&x, &g.boundary_sample(0, i as f64 / 1e4)))
            .fold(f64::INFINITY, f64::min);
        let n = g.nearest_pocket(&x).unwrap();
        assert!(!n.inside);
        assert!(close(n.distance, brute, 1e-6), "{} vs {brute}", n.distance);
    }

    #[test]
    fn nearest_pocket_1d_endpoint() {
        let n = interval().nearest_pocket(&[0.3]).unwrap();
        assert_eq!(n.pocket, 0);
        assert!(close(n.distance, 0.1, 1e-15));
        assert!(!n.inside);
    }

    #[test]
    fn projection_is_radial() {
        let p = disk().project(&[0.7, 0.5]).unwrap();
        assert!(close(p[0], 0.65, 1e-15) && close(p[1], 0.5, 1e-15));
    }

    #[test]
    fn projection_ambiguous_at_center_and_cut_locus() {
        assert!(matches!(
            disk().project(&[0.5, 0.5]),
            Err(Error::AmbiguousProjection { pocket: 0 })
        ));
        // Antipode of the interval center on the circle.
        assert!(matches!(
            interval().project(&[0.6]),
            Err(Error::AmbiguousProjection { .. })
        ));
    }

    #[test]
    fn normals_point_into_pocket() {
        let n = disk().unit_normal(0, &[0.65, 0.5]).unwrap();
        assert!(close(n[0], -1.0, 1e-12) && close(n[1], 0.0, 1e-12));
        let g = interval();
        assert!(close(g.unit_normal(0, &[0.2]).unwrap()[0], -1.0, 1e-12));
        assert!(close(g.unit_normal(0, &[0.0]).unwrap()[0], 1.0, 1e-12));
        assert!(matches!(
            g.unit_normal(0, &[0.25]),
            Err(Error::NotOnBoundary { pocket: 0, .. })
        ));
    }

    #[test]
    fn boundary_sample_anchor_and_param_roundtrip() {
        let g = disk();
        let p = g.boundary_sample(0, 0.0);
        assert!(close(p[0], 0.65, 1e-15) && close(p[1], 0.5, 1e-15));
        for u in [0.0, 0.1, 0.37, 0.999] {
            let q = g.boundary_sample(0, u);
            assert!(close(g.boundary_param(0, &q), u, 1e-12));
        }
        let g1 = interval();
        assert!(close(g1.boundary_sample(0, 0.2)[0], 0.0, 1e-15));
        assert!(close(g1.boundary_sample(0, 0.7)[0], 0.2, 1e-15));
    }

    #[test]
    fn classify_examples() {
        let g = Geometry::new(
            vec![Ball::new([0.5, 0.5], 0.15)],
            Some(Ball::new([0.0, 0.0], 0.1)),
        )
        .unwrap();
        assert_eq!(
            g.classify(&[0.65, 0.5], 0.02).unwrap(),
            RegionTag::Boundary(0)
        );
        assert_eq!(g.classify(&[0.66, 0.5], 0.02).unwrap(), RegionTag::Shell(0));
        assert_eq!(
            g.classify(&[0.64, 0.5], 0.02).unwrap(),
            RegionTag::Pocket(0)
        );
        assert_eq!(g.classify(&[0.5, 0.5], 0.02).unwrap(), RegionTag::Inner(0));
        assert_eq!(g.classify(&[0.8, 0.5], 0.02).unwrap(), RegionTag::DeepU);
        assert_eq!(g.classify(&[0.02, 0.97], 0.02).unwrap(), RegionTag::TargetF);
        assert!(matches!(
            g.classify(&[0.5, 0.5], 0.08),
            Err(Error::DeltaTooLarge { .. })
        ));
    }

    #[test]
    fn measures() {
        let g = disk();
        let p = g.pocket(0);
        assert!(close(p.volume(), std::f64::consts::PI * 0.0225, 1e-15));
        assert!(close(
            p.boundary_measure(),
            std::f64::consts::TAU * 0.15,
            1e-15
        ));
        let q = interval();
        assert!(close(q.pocket(0).volume(), 0.2, 1e-15));
        assert_eq!(q.pocket(0).boundary_measure(), 2.0);
    }

    #[test]
    fn overlapping_pockets_rejected() {
        let v = Geometry::<2>::violations(
            &[Ball::new([0.3, 0.5], 0.15), Ball::new([0.55, 0.5], 0.15)],
            None,
        );
        assert_eq!(v, vec!["pockets 0,1 closures intersect".to_string()]);
    }

    #[test]
    fn max_delta_bound() {
        let g = disk();
        assert!(close(g.max_delta(), 0.075, 1e-15));
    }
}
