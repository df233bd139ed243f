//! Map document exporters: GeoJSON, a lanelet-style JSON with successor
//! relations, and an SVG plot.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::HDMapDocument;
use crate::error::{Error, Result};
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    GeoJson,
    LaneletJson,
    Svg,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geojson" => Ok(ExportFormat::GeoJson),
            "lanelet-json" => Ok(ExportFormat::LaneletJson),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(Error::Usage(format!(
                "unknown export format `{other}` (expected geojson, lanelet-json or svg)"
            ))),
        }
    }
}

pub fn export(doc: &HDMapDocument, format: ExportFormat) -> String {
    match format {
        ExportFormat::GeoJson => to_geojson(doc),
        ExportFormat::LaneletJson => to_lanelet_json(doc),
        ExportFormat::Svg => to_svg(doc),
    }
}

fn coords(points: &[Point2]) -> Value {
    Value::Array(points.iter().map(|p| json!([p.x, p.y])).collect())
}

/// Center lines and connections as `LineString`s, lane areas as
/// `Polygon`s, in local map meters.
pub fn to_geojson(doc: &HDMapDocument) -> String {
    let mut features = Vec::new();
    for road in doc.roads.values() {
        for (k, lane) in road.lanes.iter().enumerate() {
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords(&lane.center.way_points) },
                "properties": { "role": "center_line", "edge": road.edge, "lane": k },
            }));
            let mut ring = lane.polygon();
            if let Some(first) = ring.first().copied() {
                ring.push(first);
            }
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [coords(&ring)] },
                "properties": { "role": "lane_area", "edge": road.edge, "lane": k },
            }));
        }
    }
    for x in doc.intersections.values() {
        for c in &x.connections {
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords(&c.samples) },
                "properties": {
                    "role": "connection",
                    "intersection": x.id,
                    "in_edge": c.in_edge,
                    "in_lane": c.in_lane,
                    "out_edge": c.out_edge,
                    "out_lane": c.out_lane,
                },
            }));
        }
    }
    let fc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_string_pretty(&fc).expect("geojson serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lanelet {
    pub id: String,
    pub edge: u32,
    pub lane: usize,
    pub left: Vec<[f64; 2]>,
    pub right: Vec<[f64; 2]>,
    pub centerline: Vec<[f64; 2]>,
    /// Lanelets reachable through an intersection connection.
    pub successors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LaneletMap {
    pub lanelets: Vec<Lanelet>,
}

pub fn lanelet_id(edge: u32, lane: usize) -> String {
    format!("e{edge}_l{lane}")
}

fn arr(points: &[Point2]) -> Vec<[f64; 2]> {
    points.iter().map(|p| [p.x, p.y]).collect()
}

pub fn to_lanelet_map(doc: &HDMapDocument) -> LaneletMap {
    let mut successors: BTreeMap<(u32, usize), Vec<String>> = BTreeMap::new();
    for x in doc.intersections.values() {
        for c in &x.connections {
            successors
                .entry((c.in_edge, c.in_lane))
                .or_default()
                .push(lanelet_id(c.out_edge, c.out_lane));
        }
    }
    let lanelets = doc
        .roads
        .values()
        .flat_map(|road| {
            let successors = &successors;
            road.lanes.iter().enumerate().map(move |(k, lane)| Lanelet {
                id: lanelet_id(road.edge, k),
                edge: road.edge,
                lane: k,
                left: arr(&lane.boundary.left_line),
                right: arr(&lane.boundary.right_line),
                centerline: arr(&lane.center.way_points),
                successors: successors.get(&(road.edge, k)).cloned().unwrap_or_default(),
            })
        })
        .collect();
    LaneletMap { lanelets }
}

pub fn to_lanelet_json(doc: &HDMapDocument) -> String {
    serde_json::to_string_pretty(&to_lanelet_map(doc)).expect("lanelets serialize")
}

pub fn parse_lanelet_json(text: &str) -> Result<LaneletMap> {
    let map: LaneletMap = serde_json::from_str(text)?;
    let ids: std::collections::BTreeSet<&str> = map.lanelets.iter().map(|l| l.id.as_str()).collect();
    if ids.len() != map.lanelets.len() {
        return Err(Error::Validation("duplicate lanelet id".into()));
    }
    for l in &map.lanelets {
        if let Some(s) = l.successors.iter().find(|s| !ids.contains(s.as_str())) {
            return Err(Error::Validation(format!("lanelet {} has unknown successor {s}", l.id)));
        }
        let finite = l.left.iter().chain(&l.right).chain(&l.centerline).flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation(format!("lanelet {} has non-finite coordinates", l.id)));
        }
    }
    Ok(map)
}

fn svg_points(points: &[Point2]) -> String {
    let mut s = String::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.3},{:.3}", p.x, -p.y);
    }
    s
}

/// Lanes filled, boundaries and reference trajectories dotted,
/// connections dashed.
pub fn to_svg(doc: &HDMapDocument) -> String {
    let mut all: Vec<Point2> = Vec::new();
    for road in doc.roads.values() {
        for lane in &road.lanes {
            all.extend(lane.polygon());
        }
    }
    for x in doc.intersections.values() {
        for c in &x.connections {
            all.extend(c.samples.iter().copied());
        }
    }
    let (mut lo, mut hi) = (Point2::new(0.0, 0.0), Point2::new(1.0, 1.0));
    if let Some(first) = all.first() {
        lo = *first;
        hi = *first;
        for p in &all {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    let pad = 5.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        lo.x - pad,
        -hi.y - pad,
        hi.x - lo.x + 2.0 * pad,
        hi.y - lo.y + 2.0 * pad
    );
    for road in doc.roads.values() {
        for (k, lane) in road.lanes.iter().enumerate() {
            let _ = writeln!(s, r#"<g class="lane" data-edge="{}" data-lane="{k}">"#, road.edge);
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.6" stroke="none"/>"##,
                svg_points(&lane.polygon())
            );
            for line in [&lane.boundary.left_line, &lane.boundary.right_line] {
                let _ = writeln!(
                    s,
                    r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="0.15" stroke-dasharray="0.3 0.3"/>"##,
                    svg_points(line)
                );
            }
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="0.2" stroke-dasharray="0.2 0.6"/>"##,
                svg_points(&lane.center.way_points)
            );
            s.push_str("</g>\n");
        }
    }
    for x in doc.intersections.values() {
        for c in &x.connections {
            let _ = writeln!(
                s,
                r##"<polyline class="connection" points="{}" fill="none" stroke="#2ca02c" stroke-width="0.2" stroke-dasharray="1 0.5"/>"##,
                svg_points(&c.samples)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
