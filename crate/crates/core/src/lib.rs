//! Lane-level HD map reconstruction.
//!
//! Semantic camera frames are projected into a bird's-eye-view vote grid per
//! atomic road, sedan-sized particles explore the drivable area from the
//! road start to the next intersection, terminal particles are clustered
//! into lanes, and each lane is regressed into a smooth center line with
//! asymmetric boundaries. Intersections are then stitched with quadratic
//! Bezier reference curves.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bev;
pub mod error;
pub mod evaluation;
pub mod explorer;
#[doc(hidden)]
pub mod fuzz;
pub mod geometry;
pub mod intersection;
pub mod pipeline;
pub mod pose;
pub mod regressor;
pub mod skeleton;
pub mod synthetic;

pub use error::{Error, Result};
pub use geometry::Point2;
pub use pose::Pose;
