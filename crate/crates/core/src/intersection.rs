//! Lane-to-lane topology across intersections with quadratic Bezier
//! reference curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{heading_difference, Point2};
use crate::regressor::AtomicRoad;
use crate::skeleton::{EdgeId, NodeId, SkeletonMap};

pub const DEFAULT_CURVE_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneConnection {
    pub in_edge: EdgeId,
    pub in_lane: usize,
    pub out_edge: EdgeId,
    pub out_lane: usize,
    pub p0: Point2,
    pub control: Point2,
    pub p2: Point2,
    pub samples: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: NodeId,
    pub connections: Vec<LaneConnection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntersectionConfig {
    pub curve_samples: usize,
    /// Drop connections whose heading change exceeds this (radians).
    pub max_heading_change: Option<f64>,
}

impl Default for IntersectionConfig {
    fn default() -> Self {
        IntersectionConfig {
            curve_samples: DEFAULT_CURVE_SAMPLES,
            max_heading_change: None,
        }
    }
}

/// `(in_edge, k, out_edge, k)` tuples, lane indices left to right from 0.
pub fn infer_connections(
    incoming: &[&AtomicRoad],
    outgoing: &[&AtomicRoad],
    skeleton: &SkeletonMap,
) -> Vec<(EdgeId, usize, EdgeId, usize)> {
    let mut out = Vec::new();
    for a in incoming {
        let twin = skeleton.edges.get(&a.edge).and_then(|e| e.twin);
        for b in outgoing {
            if Some(b.edge) == twin || b.edge == a.edge {
                continue;
            }
            for k in 0..a.lanes.len().min(b.lanes.len()) {
                out.push((a.edge, k, b.edge, k));
            }
        }
    }
    out.sort();
    out
}

/// Intersection of the ray from `p0` along `t0` with the line through `p2`
/// along `t2`. Falls back to the chord midpoint when the tangents are
/// parallel, when they meet behind the entry or past the exit, or when the
/// meeting point is more than two chords away (nearly parallel tangents
/// with a lateral offset).
pub fn control_point(p0: Point2, t0: Point2, p2: Point2, t2: Point2) -> Point2 {
    let denom = t0.cross(t2);
    let mid = p0.lerp(p2, 0.5);
    if denom.abs() < 1e-6 {
        return mid;
    }
    let a = (p2 - p0).cross(t2) / denom;
    let c = p0 + t0 * a;
    let chord = p0.distance(p2);
    if a < 0.0 || (c - p2).dot(t2) > 0.0 || a > 2.0 * chord || c.distance(p2) > 2.0 * chord {
        return mid;
    }
    c
}

pub fn bezier_eval(p0: Point2, p: Point2, p2: Point2, alpha: f64) -> Result<Point2> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("bezier parameter {alpha} outside [0, 1]")));
    }
    let u = 1.0 - alpha;
    Ok(p0 * (u * u) + p * (2.0 * alpha * u) + p2 * (alpha * alpha))
}

pub fn bezier_derivative(p0: Point2, p: Point2, p2: Point2, alpha: f64) -> Point2 {
    (p - p0) * (2.0 * (1.0 - alpha)) + (p2 - p) * (2.0 * alpha)
}

pub fn sample_bezier(p0: Point2, p: Point2, p2: Point2, n: usize) -> Vec<Point2> {
    if n < 2 {
        return vec![p0, p2];
    }
    (0..n)
        .map(|i| bezier_eval(p0, p, p2, i as f64 / (n - 1) as f64).expect("alpha in range"))
        .collect()
}

pub fn build_intersection(
    id: NodeId,
    incoming: &[&AtomicRoad],
    outgoing: &[&AtomicRoad],
    skeleton: &SkeletonMap,
    cfg: &IntersectionConfig,
) -> Intersection {
    let by_edge: BTreeMap<EdgeId, &AtomicRoad> = incoming
        .iter()
        .chain(outgoing.iter())
        .map(|r| (r.edge, *r))
        .collect();
    let mut connections = Vec::new();
    for (ie, k, oe, l) in infer_connections(incoming, outgoing, skeleton) {
        let lin = &by_edge[&ie].lanes[k].center;
        let lout = &by_edge[&oe].lanes[l].center;
        let (Some(&p0), Some(&p2)) = (lin.way_points.last(), lout.way_points.first()) else {
            continue;
        };
        let (t0, t2) = (lin.end_tangent(), lout.start_tangent());
        if let Some(limit) = cfg.max_heading_change {
            if heading_difference(t0.angle(), t2.angle()) > limit {
                continue;
            }
        }
        let control = control_point(p0, t0, p2, t2);
        connections.push(LaneConnection {
            in_edge: ie,
            in_lane: k,
            out_edge: oe,
            out_lane: l,
            p0,
            control,
            p2,
            samples: sample_bezier(p0, control, p2, cfg.curve_samples),
        });
    }
    Intersection { id, connections }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_in_polygon;
    use crate::regressor::{center_line, Lane, LaneBoundarySamples, PiecewiseFit, RoadFrame};
    use crate::skeleton::{build_skeleton, RawNode, RawRoadNetwork, RawWay};

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn lane(from: Point2, to: Point2, d: f64) -> Lane {
        let len = from.distance(to);
        let fit = PiecewiseFit {
            breakpoints: vec![],
            intercept: d,
            slope: 0.0,
            hinge: vec![],
            loss: 0.0,
            s_min: 0.0,
            s_max: len,
        };
        let frame = RoadFrame { origin: from, heading: (to - from).angle() };
        let center = center_line(frame, &fit, 5.0, 1.0).unwrap();
        let n = center.way_points.len();
        Lane {
            boundary: LaneBoundarySamples {
                left: vec![1.5; n],
                right: vec![1.5; n],
                left_clamped: vec![false; n],
                right_clamped: vec![false; n],
                left_class: vec![crate::bev::SemanticClass::LmSolid; n],
                right_class: vec![crate::bev::SemanticClass::LmSolid; n],
                left_line: center.way_points.clone(),
                right_line: center.way_points.clone(),
            },
            center,
        }
    }

    fn road(edge: EdgeId, lanes: usize) -> AtomicRoad {
        AtomicRoad {
            edge,
            lanes: (0..lanes).map(|i| lane(p(0.0, 0.0), p(10.0, 0.0), i as f64)).collect(),
        }
    }

    /// Star with `arms` two-way spokes around node 0.
    fn star(arms: usize) -> SkeletonMap {
        let mut nodes = vec![RawNode { id: 0, x: 0.0, y: 0.0 }];
        let mut ways = Vec::new();
        for i in 0..arms {
            let a = i as f64 * std::f64::consts::TAU / arms as f64;
            nodes.push(RawNode { id: i as i64 + 1, x: 50.0 * a.cos(), y: 50.0 * a.sin() });
            ways.push(RawWay { id: i as i64 + 10, nodes: vec![0, i as i64 + 1], oneway: false, highway: "residential".into() });
        }
        build_skeleton(&RawRoadNetwork { origin: None, nodes, ways }).unwrap()
    }

    #[test]
    fn lane_count_alignment() {
        let sk = star(2);
        let center = &sk.intersections[&0];
        let inc = road(center.incoming[0], 3);
        let out_edge = *center.outgoing.iter().find(|e| Some(**e) != sk.edges[&inc.edge].twin).unwrap();
        let out = road(out_edge, 2);
        let c = infer_connections(&[&inc], &[&out], &sk);
        assert_eq!(c, vec![(inc.edge, 0, out_edge, 0), (inc.edge, 1, out_edge, 1)]);
        assert!(infer_connections(&[&inc], &[], &sk).is_empty());
    }

    #[test]
    fn four_way_has_twelve_connections() {
        let sk = star(4);
        let center = &sk.intersections[&0];
        let inc: Vec<AtomicRoad> = center.incoming.iter().map(|e| road(*e, 1)).collect();
        let out: Vec<AtomicRoad> = center.outgoing.iter().map(|e| road(*e, 1)).collect();
        let c = infer_connections(&inc.iter().collect::<Vec<_>>(), &out.iter().collect::<Vec<_>>(), &sk);
        assert_eq!(c.len(), 12);
        let mut sorted = c.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, c);

        let sk6 = star(6);
        let center = &sk6.intersections[&0];
        let inc: Vec<AtomicRoad> = center.incoming.iter().map(|e| road(*e, 1)).collect();
        let out: Vec<AtomicRoad> = center.outgoing.iter().map(|e| road(*e, 1)).collect();
        let c = infer_connections(&inc.iter().collect::<Vec<_>>(), &out.iter().collect::<Vec<_>>(), &sk6);
        for r in &inc {
            assert_eq!(c.iter().filter(|t| t.0 == r.edge).count(), 5);
        }
    }

    #[test]
    fn control_point_examples() {
        let ex = p(1.0, 0.0);
        assert_eq!(control_point(p(0.0, 0.0), ex, p(10.0, 10.0), p(0.0, 1.0)), p(10.0, 0.0));
        assert_eq!(control_point(p(0.0, 0.0), ex, p(10.0, 0.0), ex), p(5.0, 0.0));
        assert_eq!(control_point(p(0.0, 0.0), ex, p(0.0, 10.0), p(-1.0, 0.0)), p(0.0, 5.0));
    }

    #[test]
    fn bezier_examples() {
        let (a, c, b) = (p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0));
        assert_eq!(bezier_eval(a, c, b, 0.0).unwrap(), a);
        assert_eq!(bezier_eval(a, c, b, 1.0).unwrap(), b);
        assert_eq!(bezier_eval(a, c, b, 0.5).unwrap(), p(7.5, 2.5));
        assert!(matches!(bezier_eval(a, c, b, 1.5), Err(Error::Domain(_))));
        let d0 = bezier_derivative(a, c, b, 0.0);
        let d1 = bezier_derivative(a, c, b, 1.0);
        assert!(d0.cross(c - a).abs() < 1e-9 && d1.cross(b - c).abs() < 1e-9);
        for q in sample_bezier(a, c, b, 20) {
            assert!(point_in_polygon(q, &[a, c, b]));
        }
    }

    #[test]
    fn pass_through_is_straight() {
        let sk = star(2);
        let center = &sk.intersections[&0];
        let e_in = center.incoming[0];
        let inc_stub = &sk.edges[&e_in];
        let dir = (inc_stub.polyline[1] - inc_stub.polyline[0]).normalized();
        let end = inc_stub.polyline[1] - dir * 5.0;
        let inc = AtomicRoad { edge: e_in, lanes: vec![lane(inc_stub.polyline[0], end, 0.0)] };
        let out_edge = *center.outgoing.iter().find(|e| Some(**e) != inc_stub.twin).unwrap();
        let out_stub = &sk.edges[&out_edge];
        let start = out_stub.polyline[0] + dir * 5.0;
        let out = AtomicRoad { edge: out_edge, lanes: vec![lane(start, out_stub.polyline[1], 0.0)] };
        let x = build_intersection(0, &[&inc], &[&out], &sk, &IntersectionConfig::default());
        assert_eq!(x.connections.len(), 1);
        let c = &x.connections[0];
        assert_eq!(c.samples.len(), 20);
        for q in &c.samples {
            assert!(crate::geometry::point_segment_distance(*q, c.p0, c.p2) < 0.1);
        }
    }
}
