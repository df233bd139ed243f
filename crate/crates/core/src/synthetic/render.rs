//! Camera frames ray-cast onto the topography and labeled from the truth
//! raster, plus ground LIDAR scans.

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{RenderSpec, Topography};
use crate::bev::{BevMap, CameraModel, SemanticFrame};
use crate::geometry::Point2;
use crate::pose::Pose;

/// Rays that meet the ground farther than this are left unlabeled.
const MAX_RANGE: f64 = 80.0;

/// Ground hit of a ray, found by bisection between the planes bounding
/// the topography.
fn ray_ground(origin: Point3<f64>, dir: nalgebra::Vector3<f64>, topo: &Topography) -> Option<Point2> {
    if dir.z >= -1e-9 {
        return None;
    }
    let amp = topo.max_abs();
    let at = |t: f64| origin + dir * t;
    let f = |t: f64| {
        let p = at(t);
        p.z - topo.height(p.x, p.y)
    };
    let mut lo = ((origin.z - amp) / -dir.z).max(0.0);
    let mut hi = (origin.z + amp) / -dir.z;
    if lo > MAX_RANGE {
        return None;
    }
    if amp > 0.0 {
        if f(lo) < 0.0 {
            return None;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let t = 0.5 * (lo + hi);
    if t > MAX_RANGE {
        return None;
    }
    let p = at(t);
    Some(Point2::new(p.x, p.y))
}

pub fn render_frame(
    bev: &BevMap,
    topo: &Topography,
    cam: &CameraModel,
    pose: &Pose,
    width: u32,
    height: u32,
) -> SemanticFrame {
    let mut codes = vec![0u8; width as usize * height as usize];
    for row in 0..height {
        for col in 0..width {
            let (o, d) = cam.pixel_ray(pose, col as f64 + 0.5, row as f64 + 0.5);
            if let Some(g) = ray_ground(o, d, topo) {
                let class = bev.label_at(g);
                codes[row as usize * width as usize + col as usize] = class.code();
            }
        }
    }
    SemanticFrame {
        timestamp: pose.timestamp,
        width,
        height,
        codes,
    }
}

pub(crate) fn render_frames(
    bev: &BevMap,
    topo: &Topography,
    cam: &CameraModel,
    poses: &[&Pose],
    spec: &RenderSpec,
) -> Vec<SemanticFrame> {
    poses
        .par_iter()
        .map(|p| render_frame(bev, topo, cam, p, spec.width, spec.height))
        .collect()
}

/// Jittered grid of ground returns ahead of the vehicle, in the vehicle
/// frame, lying exactly on the topography.
pub fn ground_cloud(pose: &Pose, topo: &Topography, spec: &RenderSpec, seed: u64) -> Vec<Point3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = spec.cloud_spacing;
    let jitter = 0.25 * step;
    let nx = (45.0 / step).round() as i64;
    let ny = (17.0 / step).round() as i64;
    let mut out = Vec::with_capacity(((nx + 1) * (2 * ny + 1)) as usize);
    for i in 0..=nx {
        for j in -ny..=ny {
            let x = i as f64 * step + rng.gen_range(-jitter..=jitter);
            let y = j as f64 * step + rng.gen_range(-jitter..=jitter);
            let m = pose.vehicle_to_map(&Point3::new(x, y, 0.0));
            let ground = Point3::new(m.x, m.y, topo.height(m.x, m.y));
            out.push(pose.map_to_vehicle(&ground));
        }
    }
    out
}
