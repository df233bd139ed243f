//! Road skeleton: the directed cyclic graph of atomic roads and
//! intersections derived from an OSM-style network, intersection regions of
//! interest, and pose-to-graph matching.

mod network;
mod osm;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    heading_difference, point_in_polygon, polyline_length, project_onto_polyline, Point2,
};
use crate::pose::Pose;

pub use network::{parse_network_json, write_network_json};
pub use osm::{parse_osm, parse_osm_with, write_osm_xml, HighwayFilter, EARTH_RADIUS_M};

pub type NodeId = i64;
pub type EdgeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawWay {
    pub id: i64,
    pub nodes: Vec<NodeId>,
    #[serde(default)]
    pub oneway: bool,
    #[serde(default = "default_highway")]
    pub highway: String,
}

fn default_highway() -> String {
    "residential".to_string()
}

/// Geodetic anchor of the local metric frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat: f64,
    pub lon: f64,
}

/// Nodes in local meters plus ways as node-id sequences.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawRoadNetwork {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<GeoOrigin>,
    pub nodes: Vec<RawNode>,
    pub ways: Vec<RawWay>,
}

impl RawRoadNetwork {
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashMap::with_capacity(self.nodes.len());
        for n in &self.nodes {
            if !(n.x.is_finite() && n.y.is_finite()) {
                return Err(Error::Validation(format!("node {} has non-finite coordinates", n.id)));
            }
            if ids.insert(n.id, ()).is_some() {
                return Err(Error::Validation(format!("duplicate node id {}", n.id)));
            }
        }
        for w in &self.ways {
            if w.nodes.len() < 2 {
                return Err(Error::Validation(format!("way {} has fewer than 2 nodes", w.id)));
            }
            if let Some(missing) = w.nodes.iter().find(|id| !ids.contains_key(id)) {
                return Err(Error::Validation(format!(
                    "way {} references missing node {}",
                    w.id, missing
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionStub {
    pub id: NodeId,
    pub center: Point2,
    pub incoming: Vec<EdgeId>,
    pub outgoing: Vec<EdgeId>,
    /// Counter-clockwise region of interest around the node.
    pub roi: Vec<Point2>,
}

impl IntersectionStub {
    pub fn degree(&self) -> usize {
        self.incoming.len() + self.outgoing.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicRoadStub {
    pub id: EdgeId,
    pub way_id: i64,
    pub source: NodeId,
    pub target: NodeId,
    pub polyline: Vec<Point2>,
    /// The opposite-direction edge of a two-way way segment.
    pub twin: Option<EdgeId>,
}

impl AtomicRoadStub {
    pub fn length(&self) -> f64 {
        polyline_length(&self.polyline)
    }

    /// Bearing from the first to the last polyline node.
    pub fn bearing(&self) -> f64 {
        (*self.polyline.last().unwrap() - self.polyline[0]).angle()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiConfig {
    /// Half side of the fallback square for degree <= 2 nodes.
    pub r_min: f64,
    /// Polygon vertices are pulled in to at most this distance from the center.
    pub max_vertex_distance: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        RoiConfig {
            r_min: 5.0,
            max_vertex_distance: 25.0,
        }
    }
}

/// Directed road graph `M0`. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkeletonMap {
    pub intersections: BTreeMap<NodeId, IntersectionStub>,
    pub edges: BTreeMap<EdgeId, AtomicRoadStub>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRoi {
    pub intersection_id: NodeId,
    pub polygon: Vec<Point2>,
}

impl IntersectionRoi {
    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(p, &self.polygon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocationRef {
    OnEdge { edge: EdgeId, offset: f64 },
    InIntersection { intersection: NodeId },
}

pub fn build_skeleton(net: &RawRoadNetwork) -> Result<SkeletonMap> {
    build_skeleton_with(net, &RoiConfig::default())
}

pub fn build_skeleton_with(net: &RawRoadNetwork, roi_cfg: &RoiConfig) -> Result<SkeletonMap> {
    net.validate()?;
    let coords: HashMap<NodeId, Point2> = net
        .nodes
        .iter()
        .map(|n| (n.id, Point2::new(n.x, n.y)))
        .collect();

    // Collapse consecutive repeats so zero-length segments never appear.
    let ways: Vec<(&RawWay, Vec<NodeId>)> = net
        .ways
        .iter()
        .map(|w| {
            let mut seq = w.nodes.clone();
            seq.dedup();
            (w, seq)
        })
        .filter(|(_, seq)| seq.len() >= 2)
        .collect();

    let mut way_count: HashMap<NodeId, usize> = HashMap::new();
    let mut degree: HashMap<NodeId, usize> = HashMap::new();
    for (_, seq) in &ways {
        let mut seen = Vec::new();
        for (i, id) in seq.iter().enumerate() {
            let nbrs = usize::from(i > 0) + usize::from(i + 1 < seq.len());
            *degree.entry(*id).or_default() += nbrs;
            if !seen.contains(id) {
                seen.push(*id);
                *way_count.entry(*id).or_default() += 1;
            }
        }
    }
    let is_split = |id: &NodeId| way_count[id] >= 2 || degree[id] >= 3;

    let mut map = SkeletonMap::default();
    let mut next_edge: EdgeId = 0;
    let add_node = |map: &mut SkeletonMap, id: NodeId| {
        map.intersections.entry(id).or_insert_with(|| IntersectionStub {
            id,
            center: coords[&id],
            incoming: Vec::new(),
            outgoing: Vec::new(),
            roi: Vec::new(),
        });
    };

    for (way, seq) in &ways {
        let mut start = 0;
        for i in 1..seq.len() {
            let last = i + 1 == seq.len();
            if !(last || is_split(&seq[i])) {
                continue;
            }
            let ids = &seq[start..=i];
            let polyline: Vec<Point2> = ids.iter().map(|id| coords[id]).collect();
            let (src, dst) = (ids[0], ids[ids.len() - 1]);
            add_node(&mut map, src);
            add_node(&mut map, dst);
            let fwd = next_edge;
            next_edge += 1;
            let twin = if way.oneway {
                None
            } else {
                let rev = next_edge;
                next_edge += 1;
                let mut rev_line = polyline.clone();
                rev_line.reverse();
                map.edges.insert(
                    rev,
                    AtomicRoadStub {
                        id: rev,
                        way_id: way.id,
                        source: dst,
                        target: src,
                        polyline: rev_line,
                        twin: Some(fwd),
                    },
                );
                Some(rev)
            };
            map.edges.insert(
                fwd,
                AtomicRoadStub {
                    id: fwd,
                    way_id: way.id,
                    source: src,
                    target: dst,
                    polyline,
                    twin,
                },
            );
            start = i;
        }
    }

    for e in map.edges.values() {
        map.intersections.get_mut(&e.source).unwrap().outgoing.push(e.id);
        map.intersections.get_mut(&e.target).unwrap().incoming.push(e.id);
    }
    let rois: Vec<(NodeId, Vec<Point2>)> = map
        .intersections
        .keys()
        .map(|id| (*id, compute_roi(&map, *id, roi_cfg)))
        .collect();
    for (id, poly) in rois {
        map.intersections.get_mut(&id).unwrap().roi = poly;
    }
    Ok(map)
}

fn compute_roi(map: &SkeletonMap, id: NodeId, cfg: &RoiConfig) -> Vec<Point2> {
    let node = &map.intersections[&id];
    let c = node.center;
    // (bearing, distance) of the polyline node next to the center, per edge.
    let mut spokes: Vec<(f64, f64)> = Vec::new();
    let adjacent = node
        .outgoing
        .iter()
        .map(|e| map.edges[e].polyline[1])
        .chain(node.incoming.iter().map(|e| {
            let pl = &map.edges[e].polyline;
            pl[pl.len() - 2]
        }));
    for p in adjacent {
        let v = p - c;
        let dist = v.norm().min(cfg.max_vertex_distance);
        if dist <= 1e-9 {
            continue;
        }
        let bearing = v.angle();
        match spokes.iter_mut().find(|(b, _)| heading_difference(*b, bearing) < 1e-9) {
            Some(s) => s.1 = s.1.min(dist),
            None => spokes.push((bearing, dist)),
        }
    }
    if spokes.len() <= 2 {
        let r = cfg.r_min;
        return vec![
            c + Point2::new(-r, -r),
            c + Point2::new(r, -r),
            c + Point2::new(r, r),
            c + Point2::new(-r, r),
        ];
    }
    spokes.sort_by(|a, b| a.0.total_cmp(&b.0));
    // A gap of half a turn or more would leave the center on or outside the
    // ring; plug it with an r_min vertex on the gap bisector.
    let n = spokes.len();
    let mut filled = Vec::with_capacity(n + 1);
    for i in 0..n {
        filled.push(spokes[i]);
        let next = if i + 1 < n {
            spokes[i + 1].0
        } else {
            spokes[0].0 + 2.0 * PI
        };
        let gap = next - spokes[i].0;
        if gap >= PI - 1e-12 {
            filled.push((spokes[i].0 + gap / 2.0, cfg.r_min));
        }
    }
    filled
        .into_iter()
        .map(|(b, d)| c + Point2::from_angle(b) * d)
        .collect()
}

pub fn intersection_roi(map: &SkeletonMap, id: NodeId) -> Result<IntersectionRoi> {
    let node = map
        .intersections
        .get(&id)
        .ok_or_else(|| Error::Lookup(format!("unknown intersection {id}")))?;
    Ok(IntersectionRoi {
        intersection_id: id,
        polygon: node.roi.clone(),
    })
}

/// Matches a pose to an intersection ROI (boundary inclusive) or else to the
/// closest directed edge; equal distances go to the edge whose direction
/// agrees best with the pose yaw.
pub fn locate(map: &SkeletonMap, pose: &Pose) -> Result<LocationRef> {
    let p = pose.position();
    if !p.is_finite() {
        return Err(Error::Domain("pose position is not finite".into()));
    }
    if map.intersections.is_empty() {
        return Err(Error::Lookup("skeleton map is empty".into()));
    }
    let inside = map
        .intersections
        .values()
        .filter(|n| point_in_polygon(p, &n.roi))
        .min_by(|a, b| a.center.distance(p).total_cmp(&b.center.distance(p)));
    if let Some(n) = inside {
        return Ok(LocationRef::InIntersection { intersection: n.id });
    }

    let mut best: Option<(f64, f64, EdgeId, f64)> = None;
    for e in map.edges.values() {
        let Some(pr) = project_onto_polyline(p, &e.polyline) else {
            continue;
        };
        let dh = heading_difference(pose.yaw, pr.direction.angle());
        let better = match best {
            None => true,
            Some((d, h, _, _)) => {
                if (pr.distance - d).abs() <= 1e-9 {
                    dh < h
                } else {
                    pr.distance < d
                }
            }
        };
        if better {
            best = Some((pr.distance, dh, e.id, pr.offset));
        }
    }
    match best {
        Some((_, _, edge, offset)) => Ok(LocationRef::OnEdge { edge, offset }),
        None => {
            let n = map
                .intersections
                .values()
                .min_by(|a, b| a.center.distance(p).total_cmp(&b.center.distance(p)))
                .unwrap();
            Ok(LocationRef::InIntersection { intersection: n.id })
        }
    }
}
