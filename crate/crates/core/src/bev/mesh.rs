//! Ground topography mesh: 2D Delaunay triangulation (incremental
//! Bowyer-Watson) of filtered LIDAR ground returns with z lifted onto the
//! vertices.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundMesh {
    /// Vehicle-frame vertices (meters).
    pub vertices: Vec<Point3<f64>>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
}

/// Which cloud points count as ground, in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundFilter {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
}

impl GroundFilter {
    /// Ground band `z in [h - 3, h - 0.5]` for a camera mounted `h` meters up.
    pub fn for_camera(camera_height: f64, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        GroundFilter {
            x_range,
            y_range,
            z_range: (camera_height - 3.0, camera_height - 0.5),
        }
    }

    pub fn keeps(&self, p: &Point3<f64>) -> bool {
        p.x.is_finite()
            && p.y.is_finite()
            && p.z.is_finite()
            && (self.x_range.0..=self.x_range.1).contains(&p.x)
            && (self.y_range.0..=self.y_range.1).contains(&p.y)
            && (self.z_range.0..=self.z_range.1).contains(&p.z)
    }
}

const DEDUP_TOL: f64 = 1e-6;

pub fn build_ground_mesh(cloud: &[Point3<f64>], filter: &GroundFilter) -> Result<GroundMesh> {
    let mut kept: Vec<Point3<f64>> = Vec::new();
    let mut seen: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |v: f64| (v / DEDUP_TOL).floor() as i64;
    'points: for p in cloud.iter().filter(|p| filter.keeps(p)) {
        let (kx, ky) = (key(p.x), key(p.y));
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = seen.get(&(kx + dx, ky + dy)) {
                    for &i in ids {
                        let q = &kept[i];
                        if (q.x - p.x).hypot(q.y - p.y) <= DEDUP_TOL {
                            continue 'points;
                        }
                    }
                }
            }
        }
        seen.entry((kx, ky)).or_default().push(kept.len());
        kept.push(*p);
    }
    let planar: Vec<Point2> = kept.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let triangles = delaunay(&planar)?;
    Ok(GroundMesh {
        vertices: kept,
        triangles,
    })
}

/// Positive when `d` lies inside the circumcircle of counter-clockwise `abc`.
pub fn in_circle(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Bowyer-Watson triangulation of distinct points; triangles index `points`
/// and are counter-clockwise.
pub fn delaunay(points: &[Point2]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("{n} usable points, need at least 3")));
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
    let anchor = points[0];
    let far = points
        .iter()
        .max_by(|a, b| a.distance(anchor).total_cmp(&b.distance(anchor)))
        .copied()
        .unwrap();
    let area_tol = 1e-12 * span * span;
    if points.iter().all(|p| orient(anchor, far, *p).abs() <= area_tol) {
        return Err(Error::Degenerate("all points are collinear".into()));
    }

    let mid = Point2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    let r = 20.0 * span;
    let mut verts: Vec<Point2> = points.to_vec();
    verts.push(mid + Point2::new(-2.0 * r, -r));
    verts.push(mid + Point2::new(2.0 * r, -r));
    verts.push(mid + Point2::new(0.0, 2.0 * r));
    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    for (pi, &p) in points.iter().enumerate() {
        let mut bad = Vec::new();
        for (ti, t) in tris.iter().enumerate() {
            if in_circle(verts[t[0]], verts[t[1]], verts[t[2]], p) > 0.0 {
                bad.push(ti);
            }
        }
        // Boundary of the cavity: directed edges not shared by two bad triangles.
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for &ti in &bad {
            let t = tris[ti];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary = Vec::new();
        for &ti in &bad {
            let t = tris[ti];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if edge_count[&(a.min(b), a.max(b))] == 1 {
                    boundary.push((a, b));
                }
            }
        }
        for &ti in bad.iter().rev() {
            tris.swap_remove(ti);
        }
        for (a, b) in boundary {
            if orient(verts[a], verts[b], p) > 0.0 {
                tris.push([a, b, pi]);
            }
        }
    }
    tris.retain(|t| t.iter().all(|&v| v < n));
    // Deterministic order independent of cavity bookkeeping.
    for t in tris.iter_mut() {
        let m = (0..3).min_by_key(|&k| t[k]).unwrap();
        t.rotate_left(m);
    }
    tris.sort_unstable();
    if tris.is_empty() {
        return Err(Error::Degenerate("triangulation is empty".into()));
    }
    Ok(tris)
}

/// Mesh transformed into the map frame with a bucket index for vertical
/// line queries.
pub struct MeshLocator {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    origin: Point2,
    bucket: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl MeshLocator {
    pub fn new(mesh: &GroundMesh, pose: &Pose) -> Self {
        let vertices: Vec<Point3<f64>> = mesh.vertices.iter().map(|v| pose.vehicle_to_map(v)).collect();
        let (mut lo, mut hi) = (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for v in &vertices {
            lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        let bucket = 2.0;
        let cols = (((hi.x - lo.x) / bucket).floor() as usize + 1).max(1);
        let rows = (((hi.y - lo.y) / bucket).floor() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); cols * rows];
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let xs = t.map(|i| vertices[i].x);
            let ys = t.map(|i| vertices[i].y);
            let c0 = ((xs.iter().cloned().fold(f64::INFINITY, f64::min) - lo.x) / bucket) as usize;
            let c1 = ((xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lo.x) / bucket) as usize;
            let r0 = ((ys.iter().cloned().fold(f64::INFINITY, f64::min) - lo.y) / bucket) as usize;
            let r1 = ((ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lo.y) / bucket) as usize;
            for r in r0..=r1.min(rows - 1) {
                for c in c0..=c1.min(cols - 1) {
                    buckets[r * cols + c].push(ti as u32);
                }
            }
        }
        MeshLocator {
            vertices,
            triangles: mesh.triangles.clone(),
            origin: lo,
            bucket,
            cols,
            rows,
            buckets,
        }
    }

    /// Height of the mesh under a map-frame point (barycentric), if covered.
    pub fn height_at(&self, p: Point2) -> Option<f64> {
        let fx = (p.x - self.origin.x) / self.bucket;
        let fy = (p.y - self.origin.y) / self.bucket;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (c, r) = (fx as usize, fy as usize);
        if c >= self.cols || r >= self.rows {
            return None;
        }
        for &ti in &self.buckets[r * self.cols + c] {
            let t = self.triangles[ti as usize];
            let [a, b, cc] = t.map(|i| self.vertices[i]);
            let det = (b.y - cc.y) * (a.x - cc.x) + (cc.x - b.x) * (a.y - cc.y);
            if det.abs() < 1e-15 {
                continue;
            }
            let l1 = ((b.y - cc.y) * (p.x - cc.x) + (cc.x - b.x) * (p.y - cc.y)) / det;
            let l2 = ((cc.y - a.y) * (p.x - cc.x) + (a.x - cc.x) * (p.y - cc.y)) / det;
            let l3 = 1.0 - l1 - l2;
            if l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12 {
                return Some(l1 * a.z + l2 * b.z + l3 * cc.z);
            }
        }
        None
    }
}
