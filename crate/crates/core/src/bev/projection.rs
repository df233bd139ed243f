//! Inverse perspective mapping: every BEV cell inside the forward region is
//! lifted onto the ground (flat plane or topography mesh) and looked up in the
//! semantic frame.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::frame::SemanticFrame;
use super::map::{BevPatch, GridSpec};
use super::mesh::{GroundMesh, MeshLocator};
use super::semantic::SemanticClass;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    /// Forward extent of the projected region, meters ahead of the vehicle.
    pub near: f64,
    pub far: f64,
    /// Half width of the region.
    pub lateral: f64,
    /// Allowed frame/pose timestamp mismatch (seconds).
    pub sync_tolerance: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            near: 3.0,
            far: 40.0,
            lateral: 15.0,
            sync_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    Flat,
    Mesh,
}

pub fn project_flat(
    frame: &SemanticFrame,
    cam: &CameraModel,
    pose: &Pose,
    grid: &GridSpec,
    cfg: &ProjectionConfig,
) -> Result<BevPatch> {
    check_sync(frame, pose, cfg)?;
    Ok(project_with(frame, cam, pose, grid, cfg, |_| pose.z))
}

/// Cells off the mesh footprint fall back to the flat ground plane.
pub fn project_mesh(
    frame: &SemanticFrame,
    cam: &CameraModel,
    pose: &Pose,
    mesh: &GroundMesh,
    grid: &GridSpec,
    cfg: &ProjectionConfig,
) -> Result<BevPatch> {
    check_sync(frame, pose, cfg)?;
    let locator = MeshLocator::new(mesh, pose);
    Ok(project_with(frame, cam, pose, grid, cfg, |p| {
        locator.height_at(p).unwrap_or(pose.z)
    }))
}

fn check_sync(frame: &SemanticFrame, pose: &Pose, cfg: &ProjectionConfig) -> Result<()> {
    if (frame.timestamp - pose.timestamp).abs() > cfg.sync_tolerance {
        return Err(Error::Sync {
            frame_ts: frame.timestamp,
            pose_ts: pose.timestamp,
            tolerance: cfg.sync_tolerance,
        });
    }
    Ok(())
}

/// Pixel attributed to a ground point, if it lands inside the image.
pub fn ground_pixel(
    frame: &SemanticFrame,
    cam: &CameraModel,
    pose: &Pose,
    ground: Point3<f64>,
) -> Option<(u32, u32)> {
    let (u, v) = cam.map_to_pixel(pose, &ground)?;
    if !(u >= 0.0 && v >= 0.0 && u < frame.width as f64 && v < frame.height as f64) {
        return None;
    }
    Some((u as u32, v as u32))
}

fn project_with(
    frame: &SemanticFrame,
    cam: &CameraModel,
    pose: &Pose,
    grid: &GridSpec,
    cfg: &ProjectionConfig,
    ground_z: impl Fn(Point2) -> f64,
) -> BevPatch {
    let origin = pose.position();
    let fwd = Point2::from_angle(pose.yaw);
    let left = fwd.perp();
    let corners = [
        origin + fwd * cfg.near + left * cfg.lateral,
        origin + fwd * cfg.near - left * cfg.lateral,
        origin + fwd * cfg.far + left * cfg.lateral,
        origin + fwd * cfg.far - left * cfg.lateral,
    ];
    let (mut lo, mut hi) = (corners[0], corners[0]);
    for c in &corners {
        lo = Point2::new(lo.x.min(c.x), lo.y.min(c.y));
        hi = Point2::new(hi.x.max(c.x), hi.y.max(c.y));
    }
    let (ix0, iy0) = grid.cell_of(lo);
    let (ix1, iy1) = grid.cell_of(hi);
    let mut cells = Vec::new();
    for iy in iy0..=iy1 {
        for ix in ix0..=ix1 {
            let c = grid.center(ix, iy);
            let rel = c - origin;
            let ahead = rel.dot(fwd);
            if ahead < cfg.near || ahead > cfg.far || rel.dot(left).abs() > cfg.lateral {
                continue;
            }
            let ground = Point3::new(c.x, c.y, ground_z(c));
            let Some((col, row)) = ground_pixel(frame, cam, pose, ground) else {
                continue;
            };
            let class = frame.class_at(col, row);
            if class != SemanticClass::Unknown {
                cells.push(((ix, iy), class));
            }
        }
    }
    BevPatch { cells }
}
