//! Degenerate diffusions with sticky pockets on the flat torus.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusivity;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod lab;
pub mod limit_walk;
pub mod parallel;
pub mod point;
pub mod sde;

pub use diffusivity::{BarrierParams, DiffusivityField};
pub use error::{Error, Result};
pub use geometry::{Ball, Geometry, Pocket, RegionTag};
pub use point::Point;
pub use sde::{SdeConfig, Status, Target, TrajectoryOutcome};
