//! Synthetic scenarios with exact ground truth: road skeleton, semantic BEV
//! raster, optional camera frames, poses and ground point clouds, and the
//! true lanes and lane connections.

mod bundle;
mod layout;
mod render;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bev::{BevMap, CameraModel, GridSpec, SemanticClass, SemanticFrame};
use crate::error::{Error, Result};
use crate::evaluation::{TruthConnection, TruthDocument, TruthLane};
use crate::geometry::{point_in_polygon, Point2};
use crate::pose::Pose;
use crate::skeleton::{build_skeleton, EdgeId, NodeId, RawRoadNetwork, SkeletonMap};

pub use bundle::{cloud_paths, frame_paths, read_bundle, write_bundle, BUNDLE_FILES};
pub use render::{ground_cloud, render_frame};

/// Marking band width (m); markings sit just outside the lane band.
pub const MARKING_WIDTH: f64 = 0.2;
const CELL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    Straight {
        #[serde(default = "default_length")]
        length: f64,
    },
    /// Lead-in, left-turning arc, lead-out.
    Curved {
        radius: f64,
        #[serde(default = "default_turn")]
        angle: f64,
        #[serde(default = "default_lead")]
        lead: f64,
    },
    /// One lane splitting into two parallel lanes.
    Fork {
        angle: f64,
        position: f64,
        #[serde(default = "default_length")]
        length: f64,
    },
    /// Two parallel lanes joining into one.
    Merge {
        angle: f64,
        position: f64,
        #[serde(default = "default_length")]
        length: f64,
    },
    /// Drivable band narrowing to `width` over the middle of the road.
    Narrow {
        width: f64,
        #[serde(default = "default_length")]
        length: f64,
    },
    /// Four two-way arms of length `block` around one intersection.
    Grid4 { block: f64 },
    Star6 {
        #[serde(default = "default_arm")]
        arm: f64,
    },
}

fn default_length() -> f64 {
    100.0
}
fn default_turn() -> f64 {
    PI / 2.0
}
fn default_lead() -> f64 {
    20.0
}
fn default_arm() -> f64 {
    50.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkingStyle {
    Solid,
    Dashed,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Markings {
    /// Road edges.
    pub outer: MarkingStyle,
    /// Between opposing directions, and between the branches of a fork.
    pub divider: MarkingStyle,
    /// Between lanes of the same direction.
    pub between: MarkingStyle,
}

impl Default for Markings {
    fn default() -> Self {
        Markings {
            outer: MarkingStyle::Solid,
            divider: MarkingStyle::Solid,
            between: MarkingStyle::Dashed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topography {
    Flat,
    /// `z = amplitude * sin(2 pi x / wavelength)`.
    Sine { amplitude: f64, wavelength: f64 },
}

impl Topography {
    pub fn height(&self, x: f64, _y: f64) -> f64 {
        match *self {
            Topography::Flat => 0.0,
            Topography::Sine { amplitude, wavelength } => amplitude * (2.0 * PI * x / wavelength).sin(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match *self {
            Topography::Flat => 0.0,
            Topography::Sine { amplitude, .. } => amplitude.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSpec {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub camera_height: f64,
    /// One frame every `frame_stride` poses.
    pub frame_stride: usize,
    /// Ground sample spacing of the synthetic LIDAR scan (m).
    pub cloud_spacing: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            width: 480,
            height: 360,
            focal: 375.0,
            camera_height: 1.5,
            frame_stride: 2,
            cloud_spacing: 1.0,
        }
    }
}

impl RenderSpec {
    pub fn camera(&self) -> CameraModel {
        CameraModel::forward_facing(
            self.focal,
            self.focal,
            self.width as f64 / 2.0,
            self.height as f64 / 2.0,
            self.camera_height,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub layout: Layout,
    #[serde(default = "one")]
    pub lanes_per_direction: usize,
    #[serde(default = "default_lane_width")]
    pub lane_width: f64,
    #[serde(default)]
    pub markings: Markings,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default = "flat")]
    pub topography: Topography,
    #[serde(default)]
    pub flip_rate: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Emit camera frames and point clouds in addition to the raster.
    #[serde(default)]
    pub frames: bool,
    #[serde(default)]
    pub render: RenderSpec,
}

fn one() -> usize {
    1
}
fn default_lane_width() -> f64 {
    3.0
}
fn flat() -> Topography {
    Topography::Flat
}
fn default_seed() -> u64 {
    42
}

impl ScenarioSpec {
    pub fn new(layout: Layout) -> Self {
        ScenarioSpec {
            layout,
            lanes_per_direction: 1,
            lane_width: 3.0,
            markings: Markings::default(),
            dropout: 0.0,
            topography: Topography::Flat,
            flip_rate: 0.0,
            seed: 42,
            frames: false,
            render: RenderSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if !(2.0..=5.0).contains(&self.lane_width) {
            return bad(format!("lane width {} outside [2, 5] m", self.lane_width));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1]", self.dropout));
        }
        if !(0.0..=0.2).contains(&self.flip_rate) {
            return bad(format!("flip rate {} outside [0, 0.2]", self.flip_rate));
        }
        if !(1..=4).contains(&self.lanes_per_direction) {
            return bad(format!("lanes per direction {} outside 1..=4", self.lanes_per_direction));
        }
        if let Topography::Sine { amplitude, wavelength } = self.topography {
            if !(amplitude.abs() <= 1.0 && wavelength > 1.0) {
                return bad("sine topography needs |amplitude| <= 1 m and wavelength > 1 m".into());
            }
        }
        let r = &self.render;
        if self.frames && !(r.width >= 16 && r.height >= 16 && r.focal > 0.0 && r.camera_height > 0.5 && r.frame_stride >= 1 && r.cloud_spacing > 0.05) {
            return bad(format!("invalid render settings {r:?}"));
        }
        let lanes = self.lanes_per_direction;
        match self.layout {
            Layout::Straight { length } if !(length >= 20.0) => bad(format!("straight length {length} < 20 m")),
            Layout::Curved { radius, angle, lead } => {
                if !(radius >= 10.0 && angle > 0.0 && angle <= PI / 2.0 + 1e-9 && lead >= 10.0) {
                    bad("curved layout needs radius >= 10 m, angle in (0, pi/2], lead >= 10 m".into())
                } else {
                    Ok(())
                }
            }
            Layout::Fork { angle, position, length } | Layout::Merge { angle, position, length } => {
                if lanes != 1 {
                    bad("fork and merge layouts support exactly one lane per direction".into())
                } else if !(angle > 0.0 && angle < 1.2 && position >= 10.0 && position + 20.0 <= length) {
                    bad("fork/merge needs angle in (0, 1.2) rad and 10 <= position <= length - 20".into())
                } else {
                    Ok(())
                }
            }
            Layout::Narrow { width, length } => {
                if lanes != 1 {
                    bad("narrow layout supports exactly one lane".into())
                } else if !(width >= 1.6 && width < self.lane_width && length >= 40.0) {
                    bad(format!("narrow width {width} must lie in [1.6, lane width) with length >= 40"))
                } else {
                    Ok(())
                }
            }
            Layout::Grid4 { block } if !(block >= 30.0) => bad(format!("grid4 block {block} < 30 m")),
            Layout::Star6 { arm } if !(arm >= 30.0) => bad(format!("star6 arm {arm} < 30 m")),
            _ => Ok(()),
        }
    }

    fn pitch(&self) -> f64 {
        self.lane_width + MARKING_WIDTH
    }
}

/// One painted lane: a dense center path with per-vertex half widths.
#[derive(Debug, Clone)]
pub(crate) struct LaneDef {
    pub path: Vec<Point2>,
    pub half_left: Vec<f64>,
    pub half_right: Vec<f64>,
    pub left: MarkingStyle,
    pub right: MarkingStyle,
    /// Directed skeleton segment `(source, target)` the lane belongs to.
    pub road: (NodeId, NodeId),
    /// Left-to-right index within the road.
    pub index: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Scene {
    pub network: RawRoadNetwork,
    pub lanes: Vec<LaneDef>,
    /// Drivable polygons painted under everything (intersection boxes).
    pub boxes: Vec<Vec<Point2>>,
    /// Vehicle drive paths, each a dense polyline.
    pub drives: Vec<Vec<Point2>>,
    /// Intersections whose connections belong to the truth.
    pub junctions: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct GroundTruthBundle {
    /// Known for generated bundles, absent for bundles read from disk.
    pub spec: Option<ScenarioSpec>,
    pub network: RawRoadNetwork,
    pub skeleton: SkeletonMap,
    pub bev: BevMap,
    pub poses: Vec<Pose>,
    pub camera: CameraModel,
    pub frames: Vec<SemanticFrame>,
    pub clouds: Vec<Vec<Point3<f64>>>,
    pub truth: TruthDocument,
}

pub fn generate(spec: &ScenarioSpec) -> Result<GroundTruthBundle> {
    spec.validate()?;
    let scene = layout::build(spec);
    let skeleton = build_skeleton(&scene.network)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut bev = paint(&scene, spec, &mut rng);
    if spec.flip_rate > 0.0 {
        bev = corrupt(&bev, spec.flip_rate, rng.gen());
    }
    let truth = truth_document(&scene, &skeleton, spec)?;
    let poses = drive_poses(&scene.drives, &spec.topography);
    let camera = spec.render.camera();
    let (frames, clouds) = if spec.frames {
        let stride = spec.render.frame_stride;
        let picked: Vec<&Pose> = poses.iter().step_by(stride).collect();
        let frames = render::render_frames(&bev, &spec.topography, &camera, &picked, &spec.render);
        let clouds = picked
            .iter()
            .enumerate()
            .map(|(i, p)| ground_cloud(p, &spec.topography, &spec.render, spec.seed.wrapping_add(1 + i as u64)))
            .collect();
        (frames, clouds)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(GroundTruthBundle {
        spec: Some(spec.clone()),
        network: scene.network,
        skeleton,
        bev,
        poses,
        camera,
        frames,
        clouds,
        truth,
    })
}

/// Relabels each observed (non-`Unknown`) cell to a uniformly chosen other
/// class with probability `flip_rate`.
pub fn corrupt(bev: &BevMap, flip_rate: f64, seed: u64) -> BevMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = bev.clone();
    if flip_rate <= 0.0 {
        return out;
    }
    let cells: Vec<((i64, i64), SemanticClass)> = bev.cells().collect();
    for ((ix, iy), class) in cells {
        if class == SemanticClass::Unknown {
            continue;
        }
        if rng.gen::<f64>() < flip_rate {
            let k = rng.gen_range(0..SemanticClass::ALL.len() - 1);
            let code = if k >= class.code() as usize { k + 1 } else { k };
            out.set_cell(ix, iy, SemanticClass::ALL[code]);
        }
    }
    out
}

fn interp(values: &[f64], i: usize, t: f64) -> f64 {
    if i + 1 >= values.len() {
        values[values.len() - 1]
    } else {
        values[i] + (values[i + 1] - values[i]) * t
    }
}

/// Runs of 1-3 m along a marking, each dropped with probability `rate`.
fn dropout_runs(length: f64, rate: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mut s = 0.0;
    while s < length {
        let run = rng.gen_range(1.0..=3.0);
        if rng.gen::<f64>() < rate {
            out.push((s, s + run));
        }
        s += run;
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    None,
    Dropped,
    Dashed,
    Solid,
}

/// Nearest-segment lateral coordinates of every cell near a lane path.
struct LaneField {
    x0: i64,
    y0: i64,
    w: usize,
    /// (distance, s, signed d, segment, t); `distance` infinite when unset.
    best: Vec<(f64, f64, f64, usize, f64, bool)>,
}

fn lane_field(lane: &LaneDef) -> LaneField {
    let reach = lane
        .half_left
        .iter()
        .chain(&lane.half_right)
        .cloned()
        .fold(0.0, f64::max)
        + MARKING_WIDTH
        + 2.0 * CELL;
    let (mut lo, mut hi) = (lane.path[0], lane.path[0]);
    for p in &lane.path {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let x0 = ((lo.x - reach) / CELL).floor() as i64;
    let y0 = ((lo.y - reach) / CELL).floor() as i64;
    let x1 = ((hi.x + reach) / CELL).ceil() as i64;
    let y1 = ((hi.y + reach) / CELL).ceil() as i64;
    let w = (x1 - x0 + 1) as usize;
    let h = (y1 - y0 + 1) as usize;
    let mut best = vec![(f64::INFINITY, 0.0, 0.0, 0, 0.0, false); w * h];
    let last = lane.path.len() - 2;
    let mut s0 = 0.0;
    for (si, seg) in lane.path.windows(2).enumerate() {
        let (a, b) = (seg[0], seg[1]);
        let ab = b - a;
        let len = ab.norm();
        if len <= 0.0 {
            continue;
        }
        let dir = ab * (1.0 / len);
        let cx0 = ((a.x.min(b.x) - reach) / CELL).floor() as i64;
        let cx1 = ((a.x.max(b.x) + reach) / CELL).ceil() as i64;
        let cy0 = ((a.y.min(b.y) - reach) / CELL).floor() as i64;
        let cy1 = ((a.y.max(b.y) + reach) / CELL).ceil() as i64;
        for iy in cy0..=cy1 {
            for ix in cx0..=cx1 {
                let c = Point2::new((ix as f64 + 0.5) * CELL, (iy as f64 + 0.5) * CELL);
                let raw = (c - a).dot(dir) / len;
                let t = raw.clamp(0.0, 1.0);
                let foot = a + ab * t;
                let dist = c.distance(foot);
                let slot = ((iy - y0) as usize) * w + (ix - x0) as usize;
                if dist < best[slot].0 {
                    let outside = (si == 0 && raw < 0.0) || (si == last && raw > 1.0);
                    let side = dir.cross(c - a);
                    let d = if side >= 0.0 { dist } else { -dist };
                    best[slot] = (dist, s0 + t * len, d, si, t, outside);
                }
            }
        }
        s0 += len;
    }
    LaneField { x0, y0, w, best }
}

fn in_runs(runs: &[(f64, f64)], s: f64) -> bool {
    runs.iter().any(|&(a, b)| s >= a && s < b)
}

/// Rasterizes the scene: drivable lanes and boxes first, then markings on
/// the cells no lane claims.
fn paint(scene: &Scene, spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> BevMap {
    let fields: Vec<LaneField> = scene.lanes.iter().map(lane_field).collect();
    let mut da: BTreeMap<(i64, i64), ()> = BTreeMap::new();
    let mut marks: BTreeMap<(i64, i64), Mark> = BTreeMap::new();
    for b in &scene.boxes {
        let (mut lo, mut hi) = (b[0], b[0]);
        for p in b {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        for iy in (lo.y / CELL).floor() as i64..=(hi.y / CELL).ceil() as i64 {
            for ix in (lo.x / CELL).floor() as i64..=(hi.x / CELL).ceil() as i64 {
                let c = Point2::new((ix as f64 + 0.5) * CELL, (iy as f64 + 0.5) * CELL);
                if point_in_polygon(c, b) {
                    da.insert((ix, iy), ());
                }
            }
        }
    }
    for (lane, f) in scene.lanes.iter().zip(&fields) {
        let total: f64 = lane.path.windows(2).map(|w| w[0].distance(w[1])).sum();
        let left_runs = dropout_runs(total, spec.dropout, rng);
        let right_runs = dropout_runs(total, spec.dropout, rng);
        for (slot, &(dist, s, d, si, t, outside)) in f.best.iter().enumerate() {
            if !dist.is_finite() || outside {
                continue;
            }
            let key = (f.x0 + (slot % f.w) as i64, f.y0 + (slot / f.w) as i64);
            let hl = interp(&lane.half_left, si, t);
            let hr = interp(&lane.half_right, si, t);
            if d >= -hr && d < hl {
                da.insert(key, ());
                continue;
            }
            let (style, runs) = if d >= hl && d < hl + MARKING_WIDTH {
                (lane.left, &left_runs)
            } else if d < -hr && d >= -hr - MARKING_WIDTH {
                (lane.right, &right_runs)
            } else {
                continue;
            };
            let mark = match style {
                MarkingStyle::None => continue,
                _ if in_runs(runs, s) => Mark::Dropped,
                MarkingStyle::Dashed if s.rem_euclid(6.0) >= 3.0 => Mark::Dropped,
                MarkingStyle::Dashed => Mark::Dashed,
                MarkingStyle::Solid => Mark::Solid,
            };
            let e = marks.entry(key).or_insert(Mark::None);
            let rank = |m: Mark| m as u8;
            if rank(mark) > rank(*e) {
                *e = mark;
            }
        }
    }
    let mut bev = BevMap::new(GridSpec::new(Point2::new(0.0, 0.0), CELL));
    for (&(ix, iy), m) in &marks {
        if da.contains_key(&(ix, iy)) {
            continue;
        }
        let class = match m {
            Mark::Solid => SemanticClass::LmSolid,
            Mark::Dashed => SemanticClass::LmDashed,
            // Missing paint: the road surface shows through.
            Mark::Dropped => SemanticClass::DaCenter,
            Mark::None => continue,
        };
        bev.set_cell(ix, iy, class);
    }
    for &(ix, iy) in da.keys() {
        bev.set_cell(ix, iy, SemanticClass::DaCenter);
    }
    bev
}

fn edge_between(sk: &SkeletonMap, a: NodeId, b: NodeId) -> Option<EdgeId> {
    sk.edges
        .values()
        .find(|e| e.source == a && e.target == b)
        .map(|e| e.id)
}

fn path_normals(path: &[Point2]) -> Vec<Point2> {
    let n = path.len();
    (0..n)
        .map(|i| {
            let a = path[i.saturating_sub(1)];
            let b = path[(i + 1).min(n - 1)];
            (b - a).normalized().perp()
        })
        .collect()
}

/// Portion of a lane path outside both end regions, with boundary offsets.
fn clip_lane(lane: &LaneDef, src_roi: &[Point2], dst_roi: &[Point2]) -> Option<TruthLane> {
    let path = &lane.path;
    let normals = path_normals(path);
    let inside = |p: Point2| point_in_polygon(p, src_roi) || point_in_polygon(p, dst_roi);
    // Longest run of consecutive vertices outside both regions.
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < path.len() {
        if inside(path[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < path.len() && !inside(path[i]) {
            i += 1;
        }
        if best.is_none_or(|(a, b)| i - start > b - a) {
            best = Some((start, i));
        }
    }
    let (a, b) = best?;
    if b - a < 2 {
        return None;
    }
    let refine = |out: Point2, inn: Point2| -> Point2 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if inside(out.lerp(inn, mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.lerp(inn, lo)
    };
    let mut idx: Vec<(Point2, usize)> = Vec::new();
    if a > 0 {
        idx.push((refine(path[a], path[a - 1]), a));
    }
    for k in a..b {
        idx.push((path[k], k));
    }
    if b < path.len() {
        idx.push((refine(path[b - 1], path[b]), b - 1));
    }
    idx.dedup_by(|x, y| x.0.distance(y.0) < 1e-9);
    let center: Vec<Point2> = idx.iter().map(|(p, _)| *p).collect();
    let left = idx.iter().map(|(p, k)| *p + normals[*k] * lane.half_left[*k]).collect();
    let right = idx.iter().map(|(p, k)| *p - normals[*k] * lane.half_right[*k]).collect();
    Some(TruthLane { center, left, right })
}

/// Circular arc tangent to both lane ends; straight segment when collinear.
pub fn arc_connection(p0: Point2, t0: Point2, p2: Point2, t2: Point2, samples: usize) -> Vec<Point2> {
    let cross = t0.cross(t2);
    let n = samples.max(2);
    if cross.abs() < 1e-9 {
        return (0..n).map(|i| p0.lerp(p2, i as f64 / (n - 1) as f64)).collect();
    }
    let a = (p2 - p0).cross(t2) / cross;
    let x = p0 + t0 * a;
    let (d0, d2) = (a, (p2 - x).dot(t2));
    let phi = cross.signum() * t0.dot(t2).clamp(-1.0, 1.0).acos();
    if d0 > 0.0 && (d0 - d2).abs() < 1e-3 * d0.max(1.0) {
        let r = d0 / (phi.abs() / 2.0).tan();
        let normal = t0.perp() * phi.signum();
        let center = p0 + normal * r;
        let r0 = p0 - center;
        return (0..n)
            .map(|i| center + r0.rotate(phi * i as f64 / (n - 1) as f64))
            .collect();
    }
    // Asymmetric ends: cubic Hermite with chord-length tangents.
    let l = p0.distance(p2);
    (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            let (u2, u3) = (u * u, u * u * u);
            p0 * (2.0 * u3 - 3.0 * u2 + 1.0)
                + t0 * (l * (u3 - 2.0 * u2 + u))
                + p2 * (-2.0 * u3 + 3.0 * u2)
                + t2 * (l * (u3 - u2))
        })
        .collect()
}

fn truth_document(scene: &Scene, sk: &SkeletonMap, _spec: &ScenarioSpec) -> Result<TruthDocument> {
    let mut roads: BTreeMap<EdgeId, Vec<(usize, TruthLane)>> = BTreeMap::new();
    for lane in &scene.lanes {
        let (a, b) = lane.road;
        let edge = edge_between(sk, a, b)
            .ok_or_else(|| Error::Spec(format!("no skeleton edge {a} -> {b}")))?;
        let src = &sk.intersections[&a].roi;
        let dst = &sk.intersections[&b].roi;
        if let Some(t) = clip_lane(lane, src, dst) {
            roads.entry(edge).or_default().push((lane.index, t));
        }
    }
    let roads: BTreeMap<EdgeId, Vec<TruthLane>> = roads
        .into_iter()
        .map(|(e, mut v)| {
            v.sort_by_key(|(i, _)| *i);
            (e, v.into_iter().map(|(_, t)| t).collect())
        })
        .collect();

    let mut connections = Vec::new();
    for &j in &scene.junctions {
        let node = &sk.intersections[&j];
        let mut incoming = node.incoming.clone();
        let mut outgoing = node.outgoing.clone();
        incoming.sort();
        outgoing.sort();
        for ie in &incoming {
            let twin = sk.edges[ie].twin;
            for oe in &outgoing {
                if Some(*oe) == twin || oe == ie {
                    continue;
                }
                let (Some(li), Some(lo)) = (roads.get(ie), roads.get(oe)) else {
                    continue;
                };
                for k in 0..li.len().min(lo.len()) {
                    let a = &li[k].center;
                    let b = &lo[k].center;
                    let p0 = a[a.len() - 1];
                    let t0 = (p0 - a[a.len() - 2]).normalized();
                    let p2 = b[0];
                    let t2 = (b[1] - p2).normalized();
                    connections.push(TruthConnection {
                        intersection: j,
                        in_edge: *ie,
                        in_lane: k,
                        out_edge: *oe,
                        out_lane: k,
                        curve: arc_connection(p0, t0, p2, t2, 50),
                    });
                }
            }
        }
    }
    Ok(TruthDocument { roads, connections })
}

fn drive_poses(drives: &[Vec<Point2>], topo: &Topography) -> Vec<Pose> {
    let mut poses = Vec::new();
    let mut t = 0.0;
    for d in drives {
        let pts = crate::geometry::resample_polyline(d, 1.0);
        for (i, p) in pts.iter().enumerate() {
            let next = pts[(i + 1).min(pts.len() - 1)];
            let prev = pts[i.saturating_sub(1)];
            let yaw = (next - prev).angle();
            poses.push(Pose {
                timestamp: t,
                x: p.x,
                y: p.y,
                z: topo.height(p.x, p.y),
                yaw,
                pitch: 0.0,
                roll: 0.0,
            });
            t += 0.1;
        }
        t += 10.0;
    }
    for p in &mut poses {
        p.timestamp = (p.timestamp * 10.0).round() / 10.0;
    }
    poses
}

#[cfg(test)]
mod tests;
