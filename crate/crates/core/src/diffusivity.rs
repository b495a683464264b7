//! The pocket coefficient `a(x)` and the barrier function of the exit-time bound.
//!
//! Inside pocket `k` with center `c` and radius `r`,
//! `a(x) = A_k (1 - ρ²/r²)²` where `ρ = |x - c|`; `a` vanishes on `U`. Writing
//! `h = r - ρ` for the depth, `a = ψ h² (1 - h/(2r))²` with `ψ = 4A/r²`, so
//! `A/r² · h² <= a <= 4A/r² · h²` on the whole pocket.

use crate::error::{Error, Result};
use crate::geometry::{Geometry, NearestPocket};
use crate::point::{self, Point};

/// Local coefficient data at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCoefficient<const D: usize> {
    pub a: f64,
    pub grad: Point<D>,
    /// Distance to the nearest pocket boundary (`+∞` without pockets).
    pub boundary_distance: f64,
    pub nearest: Option<NearestPocket<D>>,
}

/// Pocket coefficient field together with the geometry it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusivityField<const D: usize> {
    geometry: Geometry<D>,
    amplitudes: Vec<f64>,
    c1: f64,
    c2: f64,
}

impl<const D: usize> DiffusivityField<D> {
    pub fn new(geometry: Geometry<D>, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != geometry.pockets().len() {
            return Err(Error::Config(format!(
                "{} amplitudes for {} pockets",
                amplitudes.len(),
                geometry.pockets().len()
            )));
        }
        if let Some(a) = amplitudes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Config(format!("amplitude {a} must be positive")));
        }
        let mut c1 = f64::INFINITY;
        let mut c2 = 0.0f64;
        for (p, a) in geometry.pockets().iter().zip(&amplitudes) {
            let r2 = p.radius() * p.radius();
            c1 = c1.min(a / r2);
            c2 = c2.max(4.0 * a / r2);
        }
        // Pull the bounds off the equality cases (pocket center, h -> 0) by a
        // few ulps so floating-point evaluation of `a` cannot cross them.
        Ok(Self {
            geometry,
            amplitudes,
            c1: c1 * (1.0 - 1e-12),
            c2: c2 * (1.0 + 1e-12),
        })
    }

    /// The field `a ≡ 0`: pure Brownian motion on the same geometry.
    pub fn brownian(geometry: Geometry<D>) -> Self {
        let n = geometry.pockets().len();
        Self {
            geometry,
            amplitudes: vec![0.0; n],
            c1: 0.0,
            c2: 0.0,
        }
    }

    pub fn geometry(&self) -> &Geometry<D> {
        &self.geometry
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Envelope constants `(c₁, c₂)` with `c₁h² <= a <= c₂h²` in every pocket.
    pub fn envelope(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    /// Boundary profile `ψ_k = lim a/h²`, constant along `∂D_k`.
    pub fn psi(&self, k: usize) -> f64 {
        let r = self.geometry.pocket(k).radius();
        4.0 * self.amplitudes[k] / (r * r)
    }

    pub fn eval_a(&self, x: &Point<D>) -> f64 {
        self.local(x).a
    }

    pub fn eval_grad_a(&self, x: &Point<D>) -> Point<D> {
        self.local(x).grad
    }

    /// `a`, `∇a` and the boundary distance in one nearest-pocket pass.
    #[inline]
    pub fn local(&self, x: &Point<D>) -> LocalCoefficient<D> {
        let Some(near) = self.geometry.nearest_pocket(x) else {
            return LocalCoefficient {
                a: 0.0,
                grad: [0.0; D],
                boundary_distance: f64::INFINITY,
                nearest: None,
            };
        };
        let amp = self.amplitudes[near.pocket];
        if !near.inside || amp == 0.0 {
            return LocalCoefficient {
                a: 0.0,
                grad: [0.0; D],
                boundary_distance: near.distance,
                nearest: Some(near),
            };
        }
        let r = self.geometry.pocket(near.pocket).radius();
        let r2 = r * r;
        let t = 1.0 - near.rho * near.rho / r2;
        LocalCoefficient {
            a: amp * t * t,
            grad: point::scale(&near.offset, -4.0 * amp * t / r2),
            boundary_distance: near.distance,
            nearest: Some(near),
        }
    }
}

/// Parameters of the barrier function: shell width, small parameter and the
/// extreme values `ψ_min = inf ψ`, `ψ_max = sup ψ` of the boundary profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub delta: f64,
    pub eps: f64,
    pub psi_min: f64,
    pub psi_max: f64,
}

impl BarrierParams {
    pub fn new(delta: f64, eps: f64, psi_min: f64, psi_max: f64) -> Result<Self> {
        if !(delta > 0.0 && eps > 0.0 && psi_min > 0.0 && psi_min <= psi_max) {
            return Err(Error::Domain(format!(
                "barrier parameters need δ, ε > 0 and 0 < ψ_min <= ψ_max \
                 (got δ={delta}, ε={eps}, ψ_min={psi_min}, ψ_max={psi_max})"
            )));
        }
        Ok(Self {
            delta,
            eps,
            psi_min,
            psi_max,
        })
    }

    /// Parameters for a single pocket, where `ψ` is constant.
    pub fn for_pocket<const D: usize>(
        field: &DiffusivityField<D>,
        k: usize,
        delta: f64,
        eps: f64,
    ) -> Result<Self> {
        let psi = field.psi(k);
        Self::new(delta, eps, psi, psi)
    }
}

/// `w(h) = (2R/r) ∫₀ʰ (δ - t)/(ε + R t²) dt` in closed form, with `r = ψ_min`, `R = ψ_max`.
pub fn barrier_w(h: f64, p: &BarrierParams) -> Result<f64> {
    if !(0.0..=p.delta).contains(&h) {
        return Err(Error::Domain(format!(
            "barrier depth {h} outside [0, {}]",
            p.delta
        )));
    }
    let (big, eps) = (p.psi_max, p.eps);
    let lead = 2.0 * big / p.psi_min;
    let atan = (h * (big / eps).sqrt()).atan() / (eps * big).sqrt();
    let log = (big * h * h / eps).ln_1p() / (2.0 * big);
    Ok(lead * (p.delta * atan - log))
}

/// First derivative `w'(h)`.
pub fn barrier_dw(h: f64, p: &BarrierParams) -> f64 {
    let big = p.psi_max;
    2.0 * big / p.psi_min * (p.delta - h) / (p.eps + big * h * h)
}

/// Second derivative `w''(h)`.
pub fn barrier_d2w(h: f64, p: &BarrierParams) -> f64 {
    let big = p.psi_max;
    let q = p.eps + big * h * h;
    2.0 * big / p.psi_min * (-q - 2.0 * big * h * (p.delta - h)) / (q * q)
}

/// Terms of `(M + ε⁻¹L)u` for `u = 2ε w(h)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierTerms {
    pub depth: f64,
    /// `(ε + ψh²) w'' + 2ψh w'`.
    pub a1: f64,
    /// `(a - ψh²) w''`.
    pub a2: f64,
    /// `(⟨∇a, ∇h⟩ - 2ψh + (ε + a) Δh) w'`.
    pub a3: f64,
}

impl BarrierTerms {
    pub fn total(&self) -> f64 {
        self.a1 + self.a2 + self.a3
    }
}

/// Summary of [`verify_supersolution`].
#[derive(Debug, Clone, PartialEq)]
pub struct SupersolutionReport {
    /// Largest value of the operator over the samples.
    pub max: f64,
    pub max_a1: f64,
    pub max_abs_a2: f64,
    pub max_abs_a3: f64,
    /// `sup u = 2ε w(δ)`.
    pub sup_u: f64,
    pub samples: Vec<BarrierTerms>,
}

/// Evaluates the barrier terms at `x` in pocket `k`.
pub fn barrier_terms<const D: usize>(
    field: &DiffusivityField<D>,
    k: usize,
    x: &Point<D>,
    p: &BarrierParams,
) -> Result<BarrierTerms> {
    let pocket = field.geometry().pocket(k);
    let (v, rho) = pocket.ball.offset(x);
    let h = pocket.radius() - rho;
    if !(h > 0.0 && h < p.delta) || rho <= 0.0 {
        return Err(Error::Domain(format!(
            "point at depth {h} is not inside the layer (0, {})",
            p.delta
        )));
    }
    let loc = field.local(x);
    let psi = field.psi(k);
    let grad_h = point::scale(&v, -1.0 / rho);
    let lap_h = -((D - 1) as f64) / rho;
    let (dw, d2w) = (barrier_dw(h, p), barrier_d2w(h, p));
    let eps = p.eps;
    Ok(BarrierTerms {
        depth: h,
        a1: (eps + psi * h * h) * d2w + 2.0 * psi * h * dw,
        a2: (loc.a - psi * h * h) * d2w,
        a3: (point::dot(&loc.grad, &grad_h) - 2.0 * psi * h + (eps + loc.a) * lap_h) * dw,
    })
}

/// Evaluates `(M + ε⁻¹L)u` for `u = 2ε w(h)` on `n` deterministic points of the
/// layer `{0 < h < δ}` of pocket `k` and reports the maximum.
pub fn verify_supersolution<const D: usize>(
    field: &DiffusivityField<D>,
    k: usize,
    p: &BarrierParams,
    n: usize,
) -> Result<SupersolutionReport> {
    field.geometry().check_delta(p.delta)?;
    let pocket = field.geometry().pocket(k);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let h = p.delta * (i as f64 + 0.5) / n as f64;
        let dir = crate::geometry::boundary_direction::<D>((i as f64 * golden).fract());
        let x = point::wrap(&point::axpy(pocket.radius() - h, &dir, &pocket.center()));
        samples.push(barrier_terms(field, k, &x, p)?);
    }
    let max = samples
        .iter()
        .map(BarrierTerms::total)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_a1 = samples
        .iter()
        .map(|s| s.a1)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_abs_a2 = samples.iter().map(|s| s.a2.abs()).fold(0.0, f64::max);
    let max_abs_a3 = samples.iter().map(|s| s.a3.abs()).fold(0.0, f64::max);
    Ok(SupersolutionReport {
        max,
        max_a1,
        max_abs_a2,
        max_abs_a3,
        sup_u: 2.0 * p.eps * barrier_w(p.delta, p)?,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ball;

    fn disk(amp: f64) -> DiffusivityField<2> {
        let g = Geometry::new(vec![Ball::new([0.5, 0.5], 0.15)], None).unwrap();
        DiffusivityField::new(g, vec![amp]).unwrap()
    }

    #[test]
    fn zero_outside_and_amplitude_at_center() {
        let f = disk(0.7);
        assert_eq!(f.eval_a(&[0.9, 0.1]), 0.0);
        assert_eq!(f.eval_a(&[0.5, 0.5]), 0.7);
        assert_eq!(f.eval_grad_a(&[0.5, 0.5]), [0.0, 0.0]);
        assert_eq!(f.eval_grad_a(&[0.1, 0.5]), [0.0, 0.0]);
    }

    #[test]
    fn quadratic_vanishing_rate() {
        let f = disk(0.3);
        let psi = f.psi(0);
        let ratio = |h: f64| f.eval_a(&[0.65 - h, 0.5]) / (h * h);
        let (h1, h2) = (1e-3 * 0.15, 0.5e-3 * 0.15);
        // a/h² = ψ(1 - h/2r)² is linear in h to leading order.
        let extrapolated = 2.0 * ratio(h2) - ratio(h1);
        assert!((extrapolated - psi).abs() / psi < 1e-6);
        for s in [1e-2, 1e-3, 1e-4] {
            assert!((ratio(s * 0.15) - psi).abs() / psi < 1.01 * s);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let f = disk(1.3);
        let step = 1e-6;
        for i in 0..100 {
            let rho = 0.15 * (0.05 + 0.9 * ((i * 37 % 100) as f64 / 100.0));
            let ang = i as f64 * 0.7;
            let x = [0.5 + rho * ang.cos(), 0.5 + rho * ang.sin()];
            let g = f.eval_grad_a(&x);
            for d in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += step;
                xm[d] -= step;
                let fd = (f.eval_a(&xp) - f.eval_a(&xm)) / (2.0 * step);
                let scale = point::norm(&g).max(1e-3);
                assert!((fd - g[d]).abs() / scale <= 1e-5, "{fd} vs {}", g[d]);
            }
        }
    }

    #[test]
    fn barrier_closed_form_matches_quadrature() {
        let p = BarrierParams::new(0.02, 1e-3, 1.0, 1.0).unwrap();
        let h = 0.01;
        // Composite Simpson on the integrand; smooth, so 2000 panels is ample.
        let n = 2000;
        let f = |t: f64| 2.0 * (p.delta - t) / (p.eps + t * t);
        let step = h / n as f64;
        let mut s = f(0.0) + f(h);
        for i in 1..n {
            s += f(i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = s * step / 3.0;
        assert!((barrier_w(h, &p).unwrap() - quad).abs() < 1e-10);
        assert_eq!(barrier_w(0.0, &p).unwrap(), 0.0);
        assert_eq!(barrier_dw(p.delta, &p), 0.0);
        assert!(barrier_w(0.03, &p).is_err());
    }

    #[test]
    fn first_term_is_exactly_minus_two() {
        let f = disk(1.0);
        let p = BarrierParams::for_pocket(&f, 0, 0.02, 1e-3).unwrap();
        let rep = verify_supersolution(&f, 0, &p, 200).unwrap();
        for s in &rep.samples {
            assert!((s.a1 + 2.0).abs() < 1e-9, "{}", s.a1);
        }
        assert!(rep.max <= -0.5, "{}", rep.max);
    }

    #[test]
    fn barrier_sup_scales_like_sqrt_eps() {
        let f = disk(1.0);
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| {
                let p = BarrierParams::for_pocket(&f, 0, 0.02, eps).unwrap();
                2.0 * eps * barrier_w(0.02, &p).unwrap() / eps.sqrt()
            })
            .collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 4.0, "{ratios:?}");
    }

    #[test]
    fn amplitude_count_checked() {
        let g = Geometry::new(vec![Ball::new([0.5, 0.5], 0.15)], None).unwrap();
        assert!(DiffusivityField::new(g.clone(), vec![]).is_err());
        assert!(DiffusivityField::new(g, vec![-1.0]).is_err());
    }
}
