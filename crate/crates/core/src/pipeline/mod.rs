//! End-to-end map building: per-road BEV accumulation, exploration and
//! regression, then lane connections at every intersection.

mod config;
mod document;
pub mod export;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;

use crate::bev::{
    build_ground_mesh, decode_indexed_png, decode_point_cloud, project_flat, project_mesh, BevMap, CameraModel,
    GridSpec, GroundFilter, ProjectionMode, SemanticClass, SemanticFrame,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, MetricsReport, TruthDocument};
use crate::explorer::{explore, ExplorationConfig};
use crate::geometry::Point2;
use crate::intersection::build_intersection;
use crate::pose::{parse_pose_csv, Pose};
use crate::regressor::{build_atomic_road, AtomicRoad, RoadEnds};
use crate::skeleton::{build_skeleton, locate, parse_network_json, EdgeId, LocationRef, NodeId, SkeletonMap};
use crate::synthetic::{cloud_paths, frame_paths};

pub use config::{PathsConfig, PipelineConfig, SEED_ENV};
pub use document::{HDMapDocument, Provenance, SkeletonRef};

/// Poses further apart in time than this start a new drive.
const DRIVE_GAP: f64 = 1.0;
/// Distances ahead of the start pose at which the entry strip is probed.
const ENTRY_LOOKAHEAD: [f64; 3] = [0.0, 2.0, 4.0];

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Where the semantic BEV comes from.
pub enum BevSource {
    Raster(BevMap),
    Frames {
        camera: CameraModel,
        /// Frames with the index of their pose.
        frames: Vec<(usize, SemanticFrame)>,
        /// One cloud per frame, in the same order, when meshing.
        clouds: Vec<Vec<Point3<f64>>>,
    },
}

pub struct PipelineInputs {
    pub skeleton_bytes: Vec<u8>,
    pub skeleton: SkeletonMap,
    pub poses: Vec<Pose>,
    pub source: BevSource,
}

fn nearest_pose(poses: &[Pose], t: f64) -> usize {
    let i = poses.partition_point(|p| p.timestamp < t);
    match (i.checked_sub(1), poses.get(i)) {
        (Some(j), Some(p)) if (t - poses[j].timestamp) <= (p.timestamp - t) => j,
        (Some(j), None) => j,
        _ => i.min(poses.len().saturating_sub(1)),
    }
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<PipelineInputs> {
    let p = cfg.resolved_paths();
    let skeleton_bytes = read(&p.skeleton)?;
    let text = String::from_utf8(skeleton_bytes.clone())
        .map_err(|_| Error::Validation("skeleton file is not UTF-8".into()))?;
    let skeleton = build_skeleton(&parse_network_json(&text)?)?;
    let poses = parse_pose_csv(&read_text(&p.poses)?)?;
    if poses.is_empty() {
        return Err(Error::Validation("pose file is empty".into()));
    }
    let source = if let Some(dir) = &p.frames {
        let camera = CameraModel::parse(&read_text(p.camera.as_ref().expect("validated"))?)?;
        let mut frames = Vec::new();
        for path in frame_paths(dir)? {
            let f = SemanticFrame::from_png(&read(&path)?)?;
            let idx = nearest_pose(&poses, f.timestamp);
            frames.push((idx, f));
        }
        if frames.is_empty() {
            return Err(Error::Validation(format!("no frames found in {}", dir.display())));
        }
        let clouds = match (&p.clouds, cfg.mode) {
            (Some(dir), ProjectionMode::Mesh) => {
                let c = cloud_paths(dir)?
                    .iter()
                    .map(|path| decode_point_cloud(&read(path)?))
                    .collect::<Result<Vec<_>>>()?;
                if c.len() != frames.len() {
                    return Err(Error::Validation(format!(
                        "{} clouds for {} frames",
                        c.len(),
                        frames.len()
                    )));
                }
                c
            }
            _ => Vec::new(),
        };
        BevSource::Frames { camera, frames, clouds }
    } else {
        let raster = decode_indexed_png(&read(p.bev.as_ref().expect("validated"))?)?;
        BevSource::Raster(BevMap::from_raster(&raster)?)
    };
    Ok(PipelineInputs {
        skeleton_bytes,
        skeleton,
        poses,
        source,
    })
}

/// A run of consecutive poses on one edge, with the intersection poses
/// that lead into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Traversal {
    pub edge: EdgeId,
    pub lead_in: usize,
    pub start: usize,
    pub end: usize,
}

/// First traversal of every edge.
pub fn traversals(skeleton: &SkeletonMap, poses: &[Pose]) -> Vec<Traversal> {
    let locs: Vec<Option<LocationRef>> = poses.iter().map(|p| locate(skeleton, p).ok()).collect();
    let mut out: BTreeMap<EdgeId, Traversal> = BTreeMap::new();
    let mut i = 0;
    let mut lead_in = 0;
    while i < poses.len() {
        if i > 0 && poses[i].timestamp - poses[i - 1].timestamp > DRIVE_GAP {
            lead_in = i;
        }
        match locs[i] {
            Some(LocationRef::OnEdge { edge, .. }) => {
                let start = i;
                while i + 1 < poses.len()
                    && poses[i + 1].timestamp - poses[i].timestamp <= DRIVE_GAP
                    && matches!(locs[i + 1], Some(LocationRef::OnEdge { edge: e, .. }) if e == edge)
                {
                    i += 1;
                }
                if i > start {
                    out.entry(edge).or_insert(Traversal {
                        edge,
                        lead_in,
                        start,
                        end: i,
                    });
                }
                i += 1;
                lead_in = i;
            }
            _ => i += 1,
        }
    }
    out.into_values().collect()
}

/// Lateral extent of the drivable strip through `pose`, ignoring dashed
/// markings. Each side's reach is the smallest seen over a short
/// look-ahead, so open pavement at the road mouth does not widen the
/// strip. Returns the strip center pose and its width.
pub fn entry_strip(bev: &BevMap, pose: &Pose, max_reach: f64) -> (Pose, f64) {
    let fwd = Point2::from_angle(pose.yaw);
    let left = fwd.perp();
    let step = bev.cell_size() / 2.0;
    let reach = |origin: Point2, dir: f64| {
        let mut d = 0.0;
        while d + step <= max_reach {
            let c = bev.label_at(origin + left * (dir * (d + step)));
            if c.is_hard_boundary() || c == SemanticClass::Unknown {
                break;
            }
            d += step;
        }
        d
    };
    let (mut l, mut r) = (max_reach, max_reach);
    for ahead in ENTRY_LOOKAHEAD {
        let origin = pose.position() + fwd * ahead;
        if !bev.label_at(origin).is_traversable() {
            continue;
        }
        l = l.min(reach(origin, 1.0));
        r = r.min(reach(origin, -1.0));
    }
    let c = pose.position() + left * (0.5 * (l - r));
    (Pose { x: c.x, y: c.y, ..*pose }, l + r)
}

fn road_seed(seed: u64, edge: EdgeId) -> u64 {
    seed ^ (edge as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn accumulate_frames(
    cfg: &PipelineConfig,
    camera: &CameraModel,
    frames: &[(usize, SemanticFrame)],
    clouds: &[Vec<Point3<f64>>],
    poses: &[Pose],
    range: (usize, usize),
) -> Result<BevMap> {
    let grid = GridSpec::new(Point2::new(0.0, 0.0), cfg.cell_size);
    let mut bev = BevMap::new(grid);
    let proj = &cfg.projection;
    let filter = GroundFilter::for_camera(camera.height(), (0.0, proj.far + 10.0), (-proj.lateral - 5.0, proj.lateral + 5.0));
    for (k, (idx, frame)) in frames.iter().enumerate() {
        if *idx < range.0 || *idx > range.1 {
            continue;
        }
        let pose = &poses[*idx];
        let patch = match cfg.mode {
            ProjectionMode::Flat => project_flat(frame, camera, pose, &grid, proj)?,
            ProjectionMode::Mesh => {
                let mesh = build_ground_mesh(&clouds[k], &filter)?;
                project_mesh(frame, camera, pose, &mesh, &grid, proj)?
            }
        };
        bev.accumulate(&patch);
    }
    Ok(bev)
}

/// Per-road outcome: the road (possibly empty) plus warnings.
fn build_road(
    cfg: &PipelineConfig,
    inputs: &PipelineInputs,
    t: &Traversal,
) -> Result<(AtomicRoad, Vec<String>)> {
    let skeleton = &inputs.skeleton;
    let edge = &skeleton.edges[&t.edge];
    let local;
    let bev = match &inputs.source {
        BevSource::Raster(b) => b,
        BevSource::Frames { camera, frames, clouds } => {
            local = accumulate_frames(cfg, camera, frames, clouds, &inputs.poses, (t.lead_in, t.end))?;
            &local
        }
    };
    let (start, width) = entry_strip(bev, &inputs.poses[t.start], cfg.regression.probe.max_offset);
    let strip = (width - cfg.exploration.footprint_width).max(0.5);
    let explore_cfg = ExplorationConfig {
        rng_seed: road_seed(cfg.seed, t.edge),
        ..cfg.exploration.clone()
    };
    let roi = crate::skeleton::intersection_roi(skeleton, edge.target)?;
    let source_roi = crate::skeleton::intersection_roi(skeleton, edge.source).ok();
    let ends = RoadEnds {
        source: source_roi.as_ref(),
        target: Some(&roi),
    };
    let empty = AtomicRoad {
        edge: t.edge,
        lanes: Vec::new(),
    };
    let history = match explore(bev, &start, &roi, &explore_cfg, strip) {
        Ok(h) => h,
        Err(e) => return Ok((empty, vec![format!("road {}: {e}", t.edge)])),
    };
    let mut warnings = Vec::new();
    if history.truncated {
        warnings.push(format!("road {}: exploration hit the step limit", t.edge));
    }
    match build_atomic_road(&history, bev, edge, ends, &cfg.regression) {
        Ok(road) => {
            if road.lanes.is_empty() {
                warnings.push(format!("road {}: no lane survived clustering", t.edge));
            }
            Ok((road, warnings))
        }
        Err(e) => {
            warnings.push(format!("road {}: {e}", t.edge));
            Ok((empty, warnings))
        }
    }
}

pub fn build_map(cfg: &PipelineConfig, inputs: &PipelineInputs) -> Result<HDMapDocument> {
    let trav = traversals(&inputs.skeleton, &inputs.poses);
    let built: Vec<(AtomicRoad, Vec<String>)> = trav
        .par_iter()
        .map(|t| build_road(cfg, inputs, t))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let mut roads = BTreeMap::new();
    for (road, w) in built {
        warnings.extend(w);
        roads.insert(road.edge, road);
    }
    let sk = &inputs.skeleton;
    let intersections: BTreeMap<NodeId, _> = sk
        .intersections
        .values()
        .filter(|node| node.incoming.iter().chain(&node.outgoing).any(|e| roads.contains_key(e)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|node| {
            let incoming: Vec<&AtomicRoad> = node.incoming.iter().filter_map(|e| roads.get(e)).collect();
            let outgoing: Vec<&AtomicRoad> = node.outgoing.iter().filter_map(|e| roads.get(e)).collect();
            (node.id, build_intersection(node.id, &incoming, &outgoing, sk, &cfg.intersection))
        })
        .collect();
    Ok(HDMapDocument {
        skeleton: SkeletonRef::new(&cfg.paths.skeleton, &inputs.skeleton_bytes),
        roads,
        intersections,
        warnings,
        provenance: Some(Provenance::new(cfg)),
    })
}

pub fn cmd_build(cfg: &PipelineConfig) -> Result<HDMapDocument> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    build_map(cfg, &inputs)
}

/// Scores a document against truth; documents without provenance are
/// refused unless `force` is set.
pub fn cmd_eval(
    doc: &HDMapDocument,
    truth: &TruthDocument,
    gate: &crate::evaluation::Gate,
    rectify: bool,
    force: bool,
) -> Result<MetricsReport> {
    if doc.provenance.is_none() && !force {
        return Err(Error::Validation(
            "map document has no provenance block; pass --force to evaluate anyway".into(),
        ));
    }
    let mut report = evaluate(&doc.roads, &doc.intersections, truth, gate, rectify)?;
    report.warnings.splice(0..0, doc.warnings.iter().cloned());
    Ok(report)
}

#[cfg(test)]
mod tests;
