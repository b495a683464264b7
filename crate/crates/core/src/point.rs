//! Small fixed-size vector helpers on the unit flat torus.
//!
//! Points are plain `[f64; D]` arrays with coordinates in `[0, 1)`. Differences
//! between points always use the minimum-image convention.

pub type Point<const D: usize> = [f64; D];

#[inline]
pub fn add<const D: usize>(a: &Point<D>, b: &Point<D>) -> Point<D> {
    std::array::from_fn(|i| a[i] + b[i])
}

#[inline]
pub fn sub<const D: usize>(a: &Point<D>, b: &Point<D>) -> Point<D> {
    std::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn scale<const D: usize>(a: &Point<D>, s: f64) -> Point<D> {
    std::array::from_fn(|i| a[i] * s)
}

#[inline]
pub fn axpy<const D: usize>(s: f64, a: &Point<D>, b: &Point<D>) -> Point<D> {
    std::array::from_fn(|i| s * a[i] + b[i])
}

#[inline]
pub fn dot<const D: usize>(a: &Point<D>, b: &Point<D>) -> f64 {
    (0..D).map(|i| a[i] * b[i]).sum()
}

#[inline]
pub fn norm<const D: usize>(a: &Point<D>) -> f64 {
    dot(a, a).sqrt()
}

/// Wraps one coordinate into `[0, 1)`.
#[inline]
pub fn wrap_coord(x: f64) -> f64 {
    if (0.0..1.0).contains(&x) {
        return x;
    }
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

#[inline]
pub fn wrap<const D: usize>(x: &Point<D>) -> Point<D> {
    std::array::from_fn(|i| wrap_coord(x[i]))
}

/// Minimum-image displacement `x - y` on the unit torus.
#[inline]
pub fn min_image<const D: usize>(x: &Point<D>, y: &Point<D>) -> Point<D> {
    std::array::from_fn(|i| {
        let d = x[i] - y[i];
        if d > 0.5 {
            if d > 1.5 {
                d - d.round()
            } else {
                d - 1.0
            }
        } else if d < -0.5 {
            if d < -1.5 {
                d - d.round()
            } else {
                d + 1.0
            }
        } else {
            d
        }
    })
}

#[inline]
pub fn torus_dist<const D: usize>(x: &Point<D>, y: &Point<D>) -> f64 {
    norm(&min_image(x, y))
}

/// Volume of the unit ball in `D` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}
