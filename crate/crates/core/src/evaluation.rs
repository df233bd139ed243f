//! Map quality metrics: rigid rectification, trajectory RMS, lane polygon
//! IOU, greedy lane matching and precision/recall at a detection gate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_to_polyline, project_onto_polyline, signed_area, Point2};
use crate::intersection::Intersection;
use crate::regressor::AtomicRoad;
use crate::skeleton::{EdgeId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: f64,
    pub translation: Point2,
    /// Set when the input was degenerate and identity was returned.
    pub degenerate: bool,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: 0.0,
            translation: Point2::default(),
            degenerate: false,
        }
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotate(self.rotation) + self.translation
    }
}

/// Least-squares rotation + translation taking `est[i]` onto `gt[i]`. In the
/// plane the cross-covariance SVD reduces to a single `atan2`.
pub fn rigid_align(est: &[Point2], gt: &[Point2]) -> Result<RigidTransform> {
    if est.len() != gt.len() {
        return Err(Error::Validation(format!(
            "correspondence count mismatch: {} vs {}",
            est.len(),
            gt.len()
        )));
    }
    let n = est.len();
    let degenerate = RigidTransform {
        degenerate: true,
        ..RigidTransform::identity()
    };
    if n < 2 {
        return Ok(degenerate);
    }
    let inv = 1.0 / n as f64;
    let ce = est.iter().fold(Point2::default(), |a, &p| a + p * inv);
    let cg = gt.iter().fold(Point2::default(), |a, &p| a + p * inv);
    let (mut sdot, mut scross, mut spread) = (0.0, 0.0, 0.0);
    for (e, g) in est.iter().zip(gt) {
        let (e, g) = (*e - ce, *g - cg);
        sdot += e.dot(g);
        scross += e.cross(g);
        spread += e.dot(e);
    }
    if spread < 1e-18 || (sdot.abs() + scross.abs()) < 1e-18 {
        return Ok(degenerate);
    }
    let rotation = scross.atan2(sdot);
    Ok(RigidTransform {
        rotation,
        translation: cg - ce.rotate(rotation),
        degenerate: false,
    })
}

/// Pairs each estimate point with its foot on the nearest truth polyline.
pub fn nearest_correspondences(est: &[Point2], truth: &[Vec<Point2>]) -> (Vec<Point2>, Vec<Point2>) {
    let mut e_out = Vec::new();
    let mut g_out = Vec::new();
    for p in est {
        let best = truth
            .iter()
            .filter_map(|line| project_onto_polyline(*p, line))
            .min_by(|a, b| a.distance.total_cmp(&b.distance));
        if let Some(pr) = best {
            e_out.push(*p);
            g_out.push(pr.foot);
        }
    }
    (e_out, g_out)
}

/// RMS of perpendicular distances from estimate points to a truth polyline.
pub fn trajectory_rms(est: &[Point2], gt: &[Point2]) -> f64 {
    if est.is_empty() || gt.is_empty() {
        return f64::INFINITY;
    }
    let ss: f64 = est.iter().map(|p| distance_to_polyline(*p, gt).powi(2)).sum();
    (ss / est.len() as f64).sqrt()
}

pub fn polygon_area(poly: &[Point2]) -> f64 {
    signed_area(poly).abs()
}

/// Ear-clipping triangulation (counter-clockwise output). Collinear and
/// duplicate vertices are dropped; if no ear is found on a self-touching
/// ring the remaining vertices are fanned.
pub fn triangulate(poly: &[Point2]) -> Vec<[Point2; 3]> {
    let mut ring: Vec<Point2> = Vec::with_capacity(poly.len());
    for &p in poly {
        if ring.last().is_none_or(|q: &Point2| q.distance(p) > 1e-12) {
            ring.push(p);
        }
    }
    while ring.len() > 1 && ring[0].distance(ring[ring.len() - 1]) <= 1e-12 {
        ring.pop();
    }
    if ring.len() < 3 {
        return Vec::new();
    }
    if signed_area(&ring) < 0.0 {
        ring.reverse();
    }
    let mut out = Vec::with_capacity(ring.len() - 2);
    let mut idx: Vec<usize> = (0..ring.len()).collect();
    let mut guard = 0;
    while idx.len() > 3 && guard < 10 * ring.len() * ring.len() {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (ring[ia], ring[ib], ring[ic]);
            let turn = (b - a).cross(c - b);
            if turn.abs() <= 1e-14 {
                idx.remove(i);
                clipped = true;
                break;
            }
            if turn < 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ia && j != ib && j != ic && in_triangle_closed(ring[j], a, b, c)
            });
            if !blocked {
                out.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            let a = ring[idx[0]];
            for w in idx[1..].windows(2) {
                let (b, c) = (ring[w[0]], ring[w[1]]);
                if (b - a).cross(c - a) > 0.0 {
                    out.push([a, b, c]);
                }
            }
            return out;
        }
    }
    if idx.len() == 3 {
        let (a, b, c) = (ring[idx[0]], ring[idx[1]], ring[idx[2]]);
        if (b - a).cross(c - b) > 0.0 {
            out.push([a, b, c]);
        }
    }
    out
}

fn in_triangle_closed(p: Point2, a: Point2, b: Point2, c: Point2) -> bool {
    (b - a).cross(p - a) >= 0.0 && (c - b).cross(p - b) >= 0.0 && (a - c).cross(p - c) >= 0.0
}

/// Sutherland-Hodgman: `subject` clipped by a convex counter-clockwise `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let side = |p: Point2| (b - a).cross(p - a);
        let input = std::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let (p, q) = (input[j], input[(j + 1) % m]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push(p.lerp(q, t));
            }
        }
    }
    out
}

fn bbox(pts: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

fn boxes_overlap(a: (Point2, Point2), b: (Point2, Point2)) -> bool {
    a.0.x <= b.1.x && b.0.x <= a.1.x && a.0.y <= b.1.y && b.0.y <= a.1.y
}

/// Area of the intersection of two simple polygons, by clipping every pair
/// of triangles from their triangulations.
pub fn intersection_area(a: &[Point2], b: &[Point2]) -> f64 {
    let ta = triangulate(a);
    let tb = triangulate(b);
    let bb: Vec<_> = tb.iter().map(|t| bbox(t)).collect();
    let mut area = 0.0;
    for t in &ta {
        let ba = bbox(t);
        for (u, bu) in tb.iter().zip(&bb) {
            if boxes_overlap(ba, *bu) {
                area += polygon_area(&clip_convex(t, u));
            }
        }
    }
    area
}

pub fn polygon_iou(a: &[Point2], b: &[Point2]) -> f64 {
    let (aa, ab) = (polygon_area(a), polygon_area(b));
    if aa + ab <= 0.0 || !boxes_overlap(bbox(a), bbox(b)) {
        return 0.0;
    }
    let inter = intersection_area(a, b).min(aa).min(ab);
    let union = aa + ab - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// A detection passes when `iou > iou` or `rms < rms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gate {
    pub iou: f64,
    pub rms: f64,
}

impl Default for Gate {
    fn default() -> Self {
        Gate { iou: 0.7, rms: 0.2 }
    }
}

impl Gate {
    pub fn passes(&self, iou: f64, rms: f64) -> bool {
        iou > self.iou || rms < self.rms
    }
}

/// Lane geometry as evaluated: center polyline and area polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneGeometry {
    pub center: Vec<Point2>,
    pub polygon: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub est: usize,
    pub gt: usize,
    pub rms: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LaneMatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_est: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

/// Greedy association: highest IOU first; lanes left without polygon
/// overlap are then paired by smallest center-line RMS below `rms_limit`.
pub fn match_lanes(est: &[LaneGeometry], gt: &[LaneGeometry], rms_limit: f64) -> LaneMatchResult {
    let mut cand = Vec::new();
    for (i, e) in est.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            cand.push(MatchedPair {
                est: i,
                gt: j,
                rms: trajectory_rms(&e.center, &g.center),
                iou: polygon_iou(&e.polygon, &g.polygon),
            });
        }
    }
    let mut used_e = vec![false; est.len()];
    let mut used_g = vec![false; gt.len()];
    let mut pairs = Vec::new();
    let mut by_iou: Vec<&MatchedPair> = cand.iter().filter(|c| c.iou > 0.0).collect();
    by_iou.sort_by(|a, b| b.iou.total_cmp(&a.iou).then((a.est, a.gt).cmp(&(b.est, b.gt))));
    for c in by_iou {
        if !used_e[c.est] && !used_g[c.gt] {
            used_e[c.est] = true;
            used_g[c.gt] = true;
            pairs.push(*c);
        }
    }
    let mut by_rms: Vec<&MatchedPair> = cand.iter().filter(|c| c.rms < rms_limit).collect();
    by_rms.sort_by(|a, b| a.rms.total_cmp(&b.rms).then((a.est, a.gt).cmp(&(b.est, b.gt))));
    for c in by_rms {
        if !used_e[c.est] && !used_g[c.gt] {
            used_e[c.est] = true;
            used_g[c.gt] = true;
            pairs.push(*c);
        }
    }
    pairs.sort_by_key(|p| (p.gt, p.est));
    LaneMatchResult {
        pairs,
        unmatched_est: (0..est.len()).filter(|&i| !used_e[i]).collect(),
        unmatched_gt: (0..gt.len()).filter(|&j| !used_g[j]).collect(),
    }
}

pub fn true_positives(m: &LaneMatchResult, gate: &Gate) -> usize {
    m.pairs.iter().filter(|p| gate.passes(p.iou, p.rms)).count()
}

pub fn precision_recall(m: &LaneMatchResult, gate: &Gate) -> (f64, f64) {
    let n_est = m.pairs.len() + m.unmatched_est.len();
    let n_gt = m.pairs.len() + m.unmatched_gt.len();
    ratio_pr(true_positives(m, gate), n_est, n_gt)
}

fn ratio_pr(tp: usize, n_est: usize, n_gt: usize) -> (f64, f64) {
    let p = if n_est == 0 { 1.0 } else { tp as f64 / n_est as f64 };
    let r = if n_gt == 0 { 1.0 } else { tp as f64 / n_gt as f64 };
    (p, r)
}

/// Ground-truth lanes of one directed road, left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLane {
    pub center: Vec<Point2>,
    pub left: Vec<Point2>,
    pub right: Vec<Point2>,
}

impl TruthLane {
    pub fn geometry(&self) -> LaneGeometry {
        let mut polygon = self.left.clone();
        polygon.extend(self.right.iter().rev());
        LaneGeometry {
            center: self.center.clone(),
            polygon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthConnection {
    pub intersection: NodeId,
    pub in_edge: EdgeId,
    pub in_lane: usize,
    pub out_edge: EdgeId,
    pub out_lane: usize,
    pub curve: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TruthDocument {
    pub roads: BTreeMap<EdgeId, Vec<TruthLane>>,
    pub connections: Vec<TruthConnection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadMetrics {
    pub n_est: usize,
    pub n_gt: usize,
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
    pub rms_mean: Option<f64>,
    pub miou_per_lane: f64,
    pub miou_area_weighted: f64,
    pub pairs: Vec<MatchedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub n_est: usize,
    pub n_gt: usize,
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
    /// Mean center-line RMS over matched lane pairs.
    pub rms_mean: Option<f64>,
    pub miou_per_lane: f64,
    pub miou_area_weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionMetric {
    pub intersection: NodeId,
    pub in_edge: EdgeId,
    pub in_lane: usize,
    pub out_edge: EdgeId,
    pub out_lane: usize,
    pub curve_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyMetrics {
    pub n_est: usize,
    pub n_gt: usize,
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
    pub curve_rms_mean: Option<f64>,
    pub curve_rms_max: Option<f64>,
    pub connections: Vec<ConnectionMetric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub gate: Gate,
    pub rectification: Option<RigidTransform>,
    pub roads: BTreeMap<EdgeId, RoadMetrics>,
    pub aggregate: AggregateMetrics,
    pub topology: TopologyMetrics,
    pub warnings: Vec<String>,
}

pub fn lane_geometries(road: &AtomicRoad) -> Vec<LaneGeometry> {
    road.lanes
        .iter()
        .map(|l| LaneGeometry {
            center: l.center.way_points.clone(),
            polygon: l.polygon(),
        })
        .collect()
}

fn transform_geometry(g: &LaneGeometry, t: &RigidTransform) -> LaneGeometry {
    LaneGeometry {
        center: g.center.iter().map(|p| t.apply(*p)).collect(),
        polygon: g.polygon.iter().map(|p| t.apply(*p)).collect(),
    }
}

/// Evaluates built roads and intersections against truth. Roads present in
/// the map but absent from the truth are an association error; truth roads
/// missing from the map count as missed lanes.
pub fn evaluate(
    roads: &BTreeMap<EdgeId, AtomicRoad>,
    intersections: &BTreeMap<NodeId, Intersection>,
    truth: &TruthDocument,
    gate: &Gate,
    rectify: bool,
) -> Result<MetricsReport> {
    let unknown: Vec<String> = roads
        .keys()
        .filter(|e| !truth.roads.contains_key(e))
        .map(|e| format!("road {e}"))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Association(unknown));
    }
    let mut warnings = Vec::new();

    let mut est_geo: BTreeMap<EdgeId, Vec<LaneGeometry>> =
        roads.iter().map(|(e, r)| (*e, lane_geometries(r))).collect();
    let rectification = if rectify {
        let est_pts: Vec<Point2> = est_geo.values().flatten().flat_map(|g| g.center.iter().copied()).collect();
        let truth_lines: Vec<Vec<Point2>> = truth.roads.values().flatten().map(|l| l.center.clone()).collect();
        let (e, g) = nearest_correspondences(&est_pts, &truth_lines);
        let t = rigid_align(&e, &g)?;
        if t.degenerate {
            warnings.push("rectification degenerate; identity used".to_string());
        }
        for lanes in est_geo.values_mut() {
            for l in lanes.iter_mut() {
                *l = transform_geometry(l, &t);
            }
        }
        Some(t)
    } else {
        None
    };

    let mut per_road = BTreeMap::new();
    let mut matches_by_road: BTreeMap<EdgeId, LaneMatchResult> = BTreeMap::new();
    let (mut tp, mut n_est, mut n_gt) = (0, 0, 0);
    let (mut iou_sum, mut area_iou, mut area_sum) = (0.0, 0.0, 0.0);
    let mut rms_all = Vec::new();
    for (edge, gt_lanes) in &truth.roads {
        let gt: Vec<LaneGeometry> = gt_lanes.iter().map(|l| l.geometry()).collect();
        let est = est_geo.get(edge).cloned().unwrap_or_default();
        let m = match_lanes(&est, &gt, gate.rms);
        let t = true_positives(&m, gate);
        let (p, r) = precision_recall(&m, gate);
        let mut ious = vec![0.0; gt.len()];
        for pair in &m.pairs {
            ious[pair.gt] = pair.iou;
            rms_all.push(pair.rms);
        }
        let areas: Vec<f64> = gt.iter().map(|g| polygon_area(&g.polygon)).collect();
        let road_area: f64 = areas.iter().sum();
        let weighted: f64 = ious.iter().zip(&areas).map(|(i, a)| i * a).sum();
        let rms: Vec<f64> = m.pairs.iter().map(|p| p.rms).collect();
        per_road.insert(
            *edge,
            RoadMetrics {
                n_est: est.len(),
                n_gt: gt.len(),
                true_positives: t,
                precision: p,
                recall: r,
                rms_mean: mean(&rms),
                miou_per_lane: mean(&ious).unwrap_or(1.0),
                miou_area_weighted: if road_area > 0.0 { weighted / road_area } else { 0.0 },
                pairs: m.pairs.clone(),
            },
        );
        tp += t;
        n_est += est.len();
        n_gt += gt.len();
        iou_sum += ious.iter().sum::<f64>();
        area_iou += weighted;
        area_sum += road_area;
        matches_by_road.insert(*edge, m);
    }
    let (precision, recall) = ratio_pr(tp, n_est, n_gt);
    let aggregate = AggregateMetrics {
        n_est,
        n_gt,
        true_positives: tp,
        precision,
        recall,
        rms_mean: mean(&rms_all),
        miou_per_lane: if n_gt == 0 { 1.0 } else { iou_sum / n_gt as f64 },
        miou_area_weighted: if area_sum > 0.0 { area_iou / area_sum } else { 0.0 },
    };

    let topology = evaluate_topology(intersections, truth, &matches_by_road, rectification.as_ref());
    Ok(MetricsReport {
        gate: *gate,
        rectification,
        roads: per_road,
        aggregate,
        topology,
        warnings,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Estimated connections are translated into truth lane indices through
/// the per-road lane matching, then compared as sets.
fn evaluate_topology(
    intersections: &BTreeMap<NodeId, Intersection>,
    truth: &TruthDocument,
    matches: &BTreeMap<EdgeId, LaneMatchResult>,
    rectification: Option<&RigidTransform>,
) -> TopologyMetrics {
    let lane_map = |edge: EdgeId, est_lane: usize| -> Option<usize> {
        matches
            .get(&edge)?
            .pairs
            .iter()
            .find(|p| p.est == est_lane)
            .map(|p| p.gt)
    };
    let truth_index: BTreeMap<(EdgeId, usize, EdgeId, usize), &TruthConnection> = truth
        .connections
        .iter()
        .map(|c| ((c.in_edge, c.in_lane, c.out_edge, c.out_lane), c))
        .collect();
    let mut n_est = 0;
    let mut hit: BTreeSet<(EdgeId, usize, EdgeId, usize)> = BTreeSet::new();
    let mut connections = Vec::new();
    for x in intersections.values() {
        for c in &x.connections {
            n_est += 1;
            let (Some(k), Some(l)) = (lane_map(c.in_edge, c.in_lane), lane_map(c.out_edge, c.out_lane)) else {
                continue;
            };
            let key = (c.in_edge, k, c.out_edge, l);
            let Some(t) = truth_index.get(&key) else {
                continue;
            };
            if !hit.insert(key) {
                continue;
            }
            let samples: Vec<Point2> = match rectification {
                Some(r) => c.samples.iter().map(|p| r.apply(*p)).collect(),
                None => c.samples.clone(),
            };
            connections.push(ConnectionMetric {
                intersection: x.id,
                in_edge: c.in_edge,
                in_lane: k,
                out_edge: c.out_edge,
                out_lane: l,
                curve_rms: trajectory_rms(&samples, &t.curve),
            });
        }
    }
    let tp = hit.len();
    let (precision, recall) = ratio_pr(tp, n_est, truth.connections.len());
    let rms: Vec<f64> = connections.iter().map(|c| c.curve_rms).collect();
    TopologyMetrics {
        n_est,
        n_gt: truth.connections.len(),
        true_positives: tp,
        precision,
        recall,
        curve_rms_mean: mean(&rms),
        curve_rms_max: rms.iter().copied().reduce(f64::max),
        connections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn square(x: f64, y: f64, s: f64) -> Vec<Point2> {
        vec![p(x, y), p(x + s, y), p(x + s, y + s), p(x, y + s)]
    }

    #[test]
    fn align_translation_and_rotation() {
        let est: Vec<Point2> = (0..10).map(|i| p(i as f64, (i * i) as f64 * 0.1)).collect();
        let gt: Vec<Point2> = est.iter().map(|q| *q + p(1.0, 2.0)).collect();
        let t = rigid_align(&est, &gt).unwrap();
        assert!(t.rotation.abs() < 1e-9);
        assert!(t.translation.distance(p(1.0, 2.0)) < 1e-9);
        let th = 30f64.to_radians();
        let gt: Vec<Point2> = est.iter().map(|q| q.rotate(th)).collect();
        let t = rigid_align(&est, &gt).unwrap();
        assert!((t.rotation - th).abs() < 1e-9 && t.translation.norm() < 1e-9);
        let same = vec![p(1.0, 1.0); 5];
        assert!(rigid_align(&same, &same).unwrap().degenerate);
    }

    #[test]
    fn align_beats_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let est: Vec<Point2> = (0..30).map(|_| p(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0))).collect();
        let (th, tr) = (0.05, p(0.3, -0.2));
        let gt: Vec<Point2> = est
            .iter()
            .map(|q| q.rotate(th) + tr + p(noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let resid = |t: &RigidTransform| -> f64 { est.iter().zip(&gt).map(|(e, g)| (t.apply(*e) - *g).dot(t.apply(*e) - *g)).sum() };
        let best = rigid_align(&est, &gt).unwrap();
        let r_best = resid(&best);
        // Grid around the truth: translation is optimal given the angle.
        for i in -20..=20 {
            let a = th + i as f64 * 0.001;
            for j in -10..=10 {
                for k in -10..=10 {
                    let t = RigidTransform { rotation: a, translation: tr + p(j as f64 * 0.001, k as f64 * 0.001), degenerate: false };
                    assert!(r_best <= resid(&t) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn rms_examples() {
        let gt = vec![p(0.0, 0.0), p(100.0, 0.0)];
        let est: Vec<Point2> = (0..=100).map(|i| p(i as f64, 0.0)).collect();
        assert!(trajectory_rms(&est, &gt) < 1e-12);
        assert_eq!(trajectory_rms(&gt, &gt), 0.0);
        let off: Vec<Point2> = est.iter().map(|q| *q + p(0.0, 0.2)).collect();
        assert!((trajectory_rms(&off, &gt) - 0.2).abs() < 1e-12);
        let a = 0.3;
        let sine: Vec<Point2> = (0..=10000)
            .map(|i| {
                let x = i as f64 * 0.01;
                p(x, a * (x * std::f64::consts::TAU / 10.0).sin())
            })
            .collect();
        let r = trajectory_rms(&sine, &gt);
        assert!((r - a / 2f64.sqrt()).abs() / (a / 2f64.sqrt()) < 0.02);
        let dense = crate::geometry::resample_polyline(&gt, 0.37);
        assert!((trajectory_rms(&off, &dense) - 0.2).abs() < 0.002);
    }

    #[test]
    fn iou_examples() {
        let a = square(0.0, 0.0, 1.0);
        assert!((polygon_iou(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(polygon_iou(&a, &square(3.0, 0.0, 1.0)), 0.0);
        let b = square(0.5, 0.0, 1.0);
        assert!((polygon_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert!((polygon_iou(&a, &b) - polygon_iou(&b, &a)).abs() < 1e-12);
        // Concave L-shape vs itself and vs a square.
        let l = vec![p(0.0, 0.0), p(2.0, 0.0), p(2.0, 1.0), p(1.0, 1.0), p(1.0, 2.0), p(0.0, 2.0)];
        assert!((polygon_iou(&l, &l) - 1.0).abs() < 1e-12);
        let s = square(1.0, 1.0, 1.0);
        assert_eq!(polygon_iou(&l, &s), 0.0);
        let big = square(0.0, 0.0, 2.0);
        assert!((polygon_iou(&l, &big) - 0.75).abs() < 1e-12);
        let mut cw = l.clone();
        cw.reverse();
        assert!((polygon_iou(&cw, &big) - 0.75).abs() < 1e-12);
    }

    fn fake_match(n_est: usize, n_gt: usize, pairs: &[(usize, usize, f64, f64)]) -> LaneMatchResult {
        let pairs: Vec<MatchedPair> = pairs.iter().map(|&(e, g, iou, rms)| MatchedPair { est: e, gt: g, iou, rms }).collect();
        LaneMatchResult {
            unmatched_est: (0..n_est).filter(|i| !pairs.iter().any(|p| p.est == *i)).collect(),
            unmatched_gt: (0..n_gt).filter(|j| !pairs.iter().any(|p| p.gt == *j)).collect(),
            pairs,
        }
    }

    #[test]
    fn precision_recall_examples() {
        let g = Gate::default();
        let m = fake_match(2, 2, &[(0, 0, 0.9, 0.5), (1, 1, 0.9, 0.5)]);
        assert_eq!(precision_recall(&m, &g), (1.0, 1.0));
        let m = fake_match(3, 4, &[(0, 0, 0.9, 0.5), (1, 1, 0.2, 0.1), (2, 2, 0.2, 0.5)]);
        assert_eq!(precision_recall(&m, &g), (2.0 / 3.0, 0.5));
        let m = fake_match(1, 1, &[(0, 0, 0.7, 0.25)]);
        assert_eq!(precision_recall(&m, &g), (0.0, 0.0));
        assert_eq!(precision_recall(&fake_match(0, 0, &[]), &g), (1.0, 1.0));
        assert_eq!(precision_recall(&fake_match(0, 3, &[]), &g), (1.0, 0.0));
        // Tightening the gate never raises recall.
        let m = fake_match(3, 3, &[(0, 0, 0.95, 0.1), (1, 1, 0.8, 0.3), (2, 2, 0.6, 0.15)]);
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let gate = Gate { iou: 0.5 + 0.05 * k as f64, rms: 0.3 - 0.03 * k as f64 };
            let (_, r) = precision_recall(&m, &gate);
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn greedy_matching_prefers_overlap() {
        let lane = |y: f64| LaneGeometry {
            center: vec![p(0.0, y), p(10.0, y)],
            polygon: vec![p(0.0, y - 1.5), p(10.0, y - 1.5), p(10.0, y + 1.5), p(0.0, y + 1.5)],
        };
        let est = vec![lane(3.1), lane(0.2)];
        let gt = vec![lane(3.2), lane(0.0), lane(-3.2)];
        let m = match_lanes(&est, &gt, 0.2);
        assert_eq!(m.pairs.len(), 2);
        assert!(m.pairs.iter().any(|p| p.est == 0 && p.gt == 0));
        assert!(m.pairs.iter().any(|p| p.est == 1 && p.gt == 1));
        assert_eq!(m.unmatched_gt, vec![2]);
    }
}
