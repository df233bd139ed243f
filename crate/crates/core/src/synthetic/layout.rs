//! Scene geometry per layout: skeleton, lane ribbons, intersection boxes
//! and drive paths.

use std::f64::consts::PI;

use super::{path_normals, LaneDef, Layout, MarkingStyle, ScenarioSpec, Scene, MARKING_WIDTH};
use crate::geometry::Point2;
use crate::skeleton::{NodeId, RawNode, RawRoadNetwork, RawWay};

/// Lane ribbons continue this far past dead ends.
const OVERRUN: f64 = 10.0;
/// Distance from a junction center to the shape nodes on its arms; the
/// junction region is the polygon through these nodes.
const SHAPE_RADIUS: f64 = 10.0;
const STEP: f64 = 0.25;

fn dense_segment(a: Point2, b: Point2) -> Vec<Point2> {
    let n = ((a.distance(b) / STEP).ceil() as usize).max(1);
    (0..=n).map(|i| a.lerp(b, i as f64 / n as f64)).collect()
}

fn cumulative(path: &[Point2]) -> Vec<f64> {
    let mut s = vec![0.0];
    for w in path.windows(2) {
        s.push(s.last().unwrap() + w[0].distance(w[1]));
    }
    s
}

/// `base` displaced along its left normal by `offset(s)`.
fn offset_path(base: &[Point2], offset: impl Fn(f64) -> f64) -> Vec<Point2> {
    let normals = path_normals(base);
    cumulative(base)
        .iter()
        .zip(base.iter().zip(&normals))
        .map(|(&s, (&p, &n))| p + n * offset(s))
        .collect()
}

fn lane(
    path: Vec<Point2>,
    half: f64,
    left: MarkingStyle,
    right: MarkingStyle,
    road: (NodeId, NodeId),
    index: usize,
) -> LaneDef {
    let n = path.len();
    LaneDef {
        path,
        half_left: vec![half; n],
        half_right: vec![half; n],
        left,
        right,
        road,
        index,
    }
}

/// Left offset of lane `k` on a one-way road of `n` lanes.
fn oneway_offset(spec: &ScenarioSpec, k: usize) -> f64 {
    let n = spec.lanes_per_direction as f64;
    ((n - 1.0) / 2.0 - k as f64) * spec.pitch()
}

/// Distance of lane `k` of one direction from the center of a two-way road.
fn twoway_offset(spec: &ScenarioSpec, k: usize) -> f64 {
    MARKING_WIDTH / 2.0 + spec.lane_width / 2.0 + k as f64 * spec.pitch()
}

fn oneway_lanes(spec: &ScenarioSpec, base: &[Point2], road: (NodeId, NodeId)) -> Vec<LaneDef> {
    let n = spec.lanes_per_direction;
    let m = &spec.markings;
    (0..n)
        .map(|k| {
            let d = oneway_offset(spec, k);
            let left = if k == 0 { m.outer } else { MarkingStyle::None };
            let right = if k + 1 == n { m.outer } else { m.between };
            lane(offset_path(base, |_| d), spec.lane_width / 2.0, left, right, road, k)
        })
        .collect()
}

/// Both directions of a two-way road whose base runs from `a` to `b`.
/// The divider is painted by the `a -> b` lanes only.
fn twoway_lanes(spec: &ScenarioSpec, base: &[Point2], a: NodeId, b: NodeId) -> Vec<LaneDef> {
    let n = spec.lanes_per_direction;
    let m = &spec.markings;
    let reversed: Vec<Point2> = base.iter().rev().cloned().collect();
    let mut out = Vec::new();
    for k in 0..n {
        let d = twoway_offset(spec, k);
        let right = if k + 1 == n { m.outer } else { m.between };
        let fwd_left = if k == 0 { m.divider } else { MarkingStyle::None };
        out.push(lane(offset_path(base, |_| -d), spec.lane_width / 2.0, fwd_left, right, (a, b), k));
        out.push(lane(
            offset_path(&reversed, |_| -d),
            spec.lane_width / 2.0,
            MarkingStyle::None,
            right,
            (b, a),
            k,
        ));
    }
    out
}

fn node(id: NodeId, p: Point2) -> RawNode {
    RawNode { id, x: p.x, y: p.y }
}

fn way(id: i64, nodes: Vec<NodeId>, oneway: bool) -> RawWay {
    RawWay {
        id,
        nodes,
        oneway,
        highway: "residential".into(),
    }
}

/// A one-way road from x = 0 to x = `length` whose lanes are displaced by
/// `offset(k, x)`.
fn straight_scene(spec: &ScenarioSpec, length: f64, offsets: Option<&dyn Fn(usize, f64) -> f64>) -> Scene {
    let base = dense_segment(Point2::new(-OVERRUN, 0.0), Point2::new(length + OVERRUN, 0.0));
    let road = (1, 2);
    let mut lanes = oneway_lanes(spec, &base, road);
    if let Some(f) = offsets {
        for l in &mut lanes {
            let k = l.index;
            l.path = base.iter().map(|p| Point2::new(p.x, f(k, p.x))).collect();
        }
    }
    let mid = oneway_offset(spec, (spec.lanes_per_direction - 1) / 2);
    let drive_y = if offsets.is_some() { 0.0 } else { mid };
    Scene {
        network: RawRoadNetwork {
            origin: None,
            nodes: vec![node(1, Point2::new(0.0, 0.0)), node(2, Point2::new(length, 0.0))],
            ways: vec![way(1, vec![1, 2], true)],
        },
        lanes,
        boxes: Vec::new(),
        drives: vec![dense_segment(Point2::new(-5.0, drive_y), Point2::new(length + 5.0, drive_y))],
        junctions: Vec::new(),
    }
}

fn curved_scene(spec: &ScenarioSpec, radius: f64, angle: f64, lead: f64) -> Scene {
    let center = Point2::new(lead, radius);
    let arc_len = radius * angle;
    let exit = center + Point2::new(0.0, -radius).rotate(angle);
    let exit_dir = Point2::from_angle(angle);
    let at = |s: f64| -> Point2 {
        if s <= lead {
            Point2::new(s, 0.0)
        } else if s <= lead + arc_len {
            center + Point2::new(0.0, -radius).rotate((s - lead) / radius)
        } else {
            exit + exit_dir * (s - lead - arc_len)
        }
    };
    let total = 2.0 * lead + arc_len;
    let samples = |from: f64, to: f64, step: f64| -> Vec<Point2> {
        let n = (((to - from) / step).ceil() as usize).max(1);
        (0..=n).map(|i| at(from + (to - from) * i as f64 / n as f64)).collect()
    };
    // `at` only covers [0, total]; extend the ends along their tangents.
    let n_pre = (OVERRUN / STEP) as usize;
    let base: Vec<Point2> = (0..n_pre)
        .map(|i| Point2::new(-OVERRUN + i as f64 * STEP, 0.0))
        .chain(samples(0.0, total, STEP))
        .chain((1..=n_pre).map(|i| at(total) + exit_dir * (i as f64 * STEP)))
        .collect();
    let shape = samples(0.0, total, 5.0);
    let ids: Vec<NodeId> = (1..=shape.len() as NodeId).collect();
    let nodes = shape.iter().zip(&ids).map(|(p, &id)| node(id, *p)).collect();
    let road = (ids[0], *ids.last().unwrap());
    let lanes = oneway_lanes(spec, &base, road);
    let mid = oneway_offset(spec, (spec.lanes_per_direction - 1) / 2);
    let drive_base: Vec<Point2> = (0..=20)
        .map(|i| Point2::new(-5.0 + i as f64 * 0.25, 0.0))
        .chain(samples(0.0, total, STEP).into_iter().skip(1))
        .chain((1..=20).map(|i| at(total) + exit_dir * (i as f64 * 0.25)))
        .collect();
    Scene {
        network: RawRoadNetwork {
            origin: None,
            nodes,
            ways: vec![way(1, ids, true)],
        },
        lanes,
        boxes: Vec::new(),
        drives: vec![offset_path(&drive_base, |_| mid)],
        junctions: Vec::new(),
    }
}

fn narrow_scene(spec: &ScenarioSpec, width: f64, length: f64) -> Scene {
    let mut scene = straight_scene(spec, length, None);
    let full = spec.lane_width / 2.0;
    let narrow = width / 2.0;
    let (a, b) = (length / 3.0, 2.0 * length / 3.0);
    let ramp = 10.0_f64.min(a / 2.0);
    let half = |x: f64| -> f64 {
        let t = if x <= a - ramp || x >= b + ramp {
            0.0
        } else if x < a {
            (x - (a - ramp)) / ramp
        } else if x <= b {
            1.0
        } else {
            1.0 - (x - b) / ramp
        };
        full + (narrow - full) * t
    };
    for l in &mut scene.lanes {
        let h: Vec<f64> = l.path.iter().map(|p| half(p.x)).collect();
        l.half_left = h.clone();
        l.half_right = h;
    }
    scene
}

/// Lanes of a star junction: two-way arms at the given bearings, a
/// regular box around the center and straight-through drives.
fn star_scene(spec: &ScenarioSpec, bearings: &[f64], arm: f64) -> Scene {
    let k = bearings.len();
    let center: NodeId = 1;
    let mut nodes = vec![node(center, Point2::new(0.0, 0.0))];
    let mut ways = Vec::new();
    let mut lanes = Vec::new();
    for (i, &b) in bearings.iter().enumerate() {
        let u = Point2::from_angle(b);
        let shape = 100 + i as NodeId;
        let end = 200 + i as NodeId;
        nodes.push(node(shape, u * SHAPE_RADIUS));
        nodes.push(node(end, u * arm));
        ways.push(way(10 + i as i64, vec![center, shape, end], false));
        let base = dense_segment(u * 2.0, u * (arm + OVERRUN));
        lanes.extend(twoway_lanes(spec, &base, center, end));
    }
    // Paved junction: the corners where each arm's outer edges cross the
    // junction region, so no pavement lies outside both region and arms.
    let half = twoway_offset(spec, spec.lanes_per_direction - 1) + spec.lane_width / 2.0 + MARKING_WIDTH;
    let reach = SHAPE_RADIUS - half * (PI / k as f64).tan();
    let boxes = vec![bearings
        .iter()
        .flat_map(|&b| {
            let u = Point2::from_angle(b);
            [u * reach - u.perp() * half, u * reach + u.perp() * half]
        })
        .collect()];
    let off = twoway_offset(spec, 0);
    let drives = bearings
        .iter()
        .map(|&b| {
            // Inbound along arm `b`, outbound along the opposite arm.
            let u = Point2::from_angle(b);
            let heading = -u;
            let right = -heading.perp();
            dense_segment(u * (arm + 5.0) + right * off, -u * (arm + 5.0) + right * off)
        })
        .collect();
    Scene {
        network: RawRoadNetwork {
            origin: None,
            nodes,
            ways,
        },
        lanes,
        boxes,
        drives,
        junctions: vec![center],
    }
}

pub(crate) fn build(spec: &ScenarioSpec) -> Scene {
    match spec.layout {
        Layout::Straight { length } => straight_scene(spec, length, None),
        Layout::Curved { radius, angle, lead } => curved_scene(spec, radius, angle, lead),
        Layout::Fork { angle, position, length } => {
            let spread = spec.pitch() / 2.0;
            let slope = (angle / 2.0).tan();
            let f = move |k: usize, x: f64| {
                let d = ((x - position).max(0.0) * slope).min(spread);
                if k == 0 {
                    d
                } else {
                    -d
                }
            };
            fork_scene(spec, length, &f)
        }
        Layout::Merge { angle, position, length } => {
            let spread = spec.pitch() / 2.0;
            let slope = (angle / 2.0).tan();
            let f = move |k: usize, x: f64| {
                let d = ((position - x).max(0.0) * slope).min(spread);
                if k == 0 {
                    d
                } else {
                    -d
                }
            };
            fork_scene(spec, length, &f)
        }
        Layout::Narrow { width, length } => narrow_scene(spec, width, length),
        Layout::Grid4 { block } => star_scene(spec, &[0.0, PI / 2.0, PI, 1.5 * PI], block),
        Layout::Star6 { arm } => {
            let b: Vec<f64> = (0..6).map(|i| i as f64 * PI / 3.0).collect();
            star_scene(spec, &b, arm)
        }
    }
}

/// Two lanes on one edge, coincident where `offset` is zero. The left
/// lane paints the outer left edge and the divider; the right lane only
/// its outer edge.
fn fork_scene(spec: &ScenarioSpec, length: f64, offset: &dyn Fn(usize, f64) -> f64) -> Scene {
    let mut scene = straight_scene(spec, length, Some(offset));
    let m = spec.markings;
    let base = scene.lanes[0].clone();
    let half = spec.lane_width / 2.0;
    scene.lanes = (0..2)
        .map(|k| {
            let path = base.path.iter().map(|p| Point2::new(p.x, offset(k, p.x))).collect();
            let (left, right) = if k == 0 {
                (m.outer, m.divider)
            } else {
                (MarkingStyle::None, m.outer)
            };
            lane(path, half, left, right, base.road, k)
        })
        .collect();
    scene
}
