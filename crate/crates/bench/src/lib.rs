//! Fixtures shared by the benchmarks.

use pocketlab_core::{Ball, DiffusivityField, Geometry};

/// Disk pocket of radius 0.15 at the torus center.
pub fn disk() -> Geometry<2> {
    Geometry::new(vec![Ball::new([0.5, 0.5], 0.15)], None).expect("valid geometry")
}

pub fn disk_field(amplitude: f64) -> DiffusivityField<2> {
    DiffusivityField::new(disk(), vec![amplitude]).expect("valid field")
}

/// Disk pocket with a target disk at the corner.
pub fn disk_with_target() -> Geometry<2> {
    Geometry::new(
        vec![Ball::new([0.5, 0.5], 0.15)],
        Some(Ball::new([0.0, 0.0], 0.1)),
    )
    .expect("valid geometry")
}

/// Interval pocket `[0, 0.2]` with target `[0.55, 0.65]`.
pub fn interval_with_target() -> Geometry<1> {
    Geometry::new(vec![Ball::new([0.1], 0.1)], Some(Ball::new([0.6], 0.05)))
        .expect("valid geometry")
}
