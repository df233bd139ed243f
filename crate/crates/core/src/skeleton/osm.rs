//! OSM XML subset: `node` (id, lat, lon), `way` (id, `nd ref`, `tag`
//! highway/oneway). Everything else is ignored.

use std::collections::{HashMap, HashSet};

use super::{GeoOrigin, RawNode, RawRoadNetwork, RawWay};
use crate::error::{Error, Result};

/// Mean Earth radius used by the local equirectangular projection.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Highway classes kept as drivable roads.
#[derive(Debug, Clone)]
pub struct HighwayFilter {
    pub accepted: HashSet<String>,
}

impl Default for HighwayFilter {
    fn default() -> Self {
        let accepted = [
            "motorway",
            "trunk",
            "primary",
            "secondary",
            "tertiary",
            "unclassified",
            "residential",
            "service",
            "living_street",
            "road",
            "motorway_link",
            "trunk_link",
            "primary_link",
            "secondary_link",
            "tertiary_link",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        HighwayFilter { accepted }
    }
}

impl HighwayFilter {
    pub fn accepts(&self, class: &str) -> bool {
        self.accepted.contains(class)
    }
}

pub fn parse_osm(xml_text: &str) -> Result<RawRoadNetwork> {
    parse_osm_with(xml_text, &HighwayFilter::default())
}

pub fn parse_osm_with(xml_text: &str, filter: &HighwayFilter) -> Result<RawRoadNetwork> {
    let doc = roxmltree::Document::parse(xml_text)
        .map_err(|e| Error::parse(e.pos().row as usize, e.to_string()))?;
    let line_of = |n: &roxmltree::Node| doc.text_pos_at(n.range().start).row as usize;

    let mut geo: HashMap<i64, (f64, f64)> = HashMap::new();
    let mut node_order: Vec<i64> = Vec::new();
    let mut ways: Vec<RawWay> = Vec::new();

    for el in doc.root_element().children().filter(|n| n.is_element()) {
        match el.tag_name().name() {
            "node" => {
                let id = int_attr(&el, "id", line_of(&el))?;
                let lat = float_attr(&el, "lat", line_of(&el))?;
                let lon = float_attr(&el, "lon", line_of(&el))?;
                if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                    return Err(Error::parse(line_of(&el), format!("node {id} out of range")));
                }
                if geo.insert(id, (lat, lon)).is_none() {
                    node_order.push(id);
                }
            }
            "way" => {
                let id = int_attr(&el, "id", line_of(&el))?;
                let mut refs = Vec::new();
                let mut highway = None;
                let mut oneway = "no".to_string();
                for child in el.children().filter(|n| n.is_element()) {
                    match child.tag_name().name() {
                        "nd" => refs.push(int_attr(&child, "ref", line_of(&child))?),
                        "tag" => match (child.attribute("k"), child.attribute("v")) {
                            (Some("highway"), Some(v)) => highway = Some(v.to_string()),
                            (Some("oneway"), Some(v)) => oneway = v.to_string(),
                            _ => {}
                        },
                        _ => {}
                    }
                }
                let Some(highway) = highway else { continue };
                if !filter.accepts(&highway) {
                    continue;
                }
                let is_oneway = matches!(oneway.as_str(), "yes" | "true" | "1" | "-1");
                if oneway == "-1" {
                    refs.reverse();
                }
                ways.push(RawWay {
                    id,
                    nodes: refs,
                    oneway: is_oneway,
                    highway,
                });
            }
            _ => {}
        }
    }

    for w in &ways {
        if w.nodes.len() < 2 {
            return Err(Error::Validation(format!("way {} has fewer than 2 nodes", w.id)));
        }
        if let Some(missing) = w.nodes.iter().find(|r| !geo.contains_key(r)) {
            return Err(Error::Validation(format!(
                "way {} references missing node {}",
                w.id, missing
            )));
        }
    }

    let used: HashSet<i64> = ways.iter().flat_map(|w| w.nodes.iter().copied()).collect();
    let kept: Vec<i64> = node_order.into_iter().filter(|id| used.contains(id)).collect();
    if kept.is_empty() {
        return Ok(RawRoadNetwork::default());
    }
    let (mut lat_lo, mut lat_hi, mut lon_lo, mut lon_hi) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for id in &kept {
        let (lat, lon) = geo[id];
        lat_lo = lat_lo.min(lat);
        lat_hi = lat_hi.max(lat);
        lon_lo = lon_lo.min(lon);
        lon_hi = lon_hi.max(lon);
    }
    let origin = GeoOrigin {
        lat: 0.5 * (lat_lo + lat_hi),
        lon: 0.5 * (lon_lo + lon_hi),
    };
    let nodes = kept
        .iter()
        .map(|id| {
            let (lat, lon) = geo[id];
            let (x, y) = project(origin, lat, lon);
            RawNode { id: *id, x, y }
        })
        .collect();
    Ok(RawRoadNetwork {
        origin: Some(origin),
        nodes,
        ways,
    })
}

/// Equirectangular projection about `origin`, meters east/north.
fn project(origin: GeoOrigin, lat: f64, lon: f64) -> (f64, f64) {
    let x = EARTH_RADIUS_M * (lon - origin.lon).to_radians() * origin.lat.to_radians().cos();
    let y = EARTH_RADIUS_M * (lat - origin.lat).to_radians();
    (x, y)
}

fn unproject(origin: GeoOrigin, x: f64, y: f64) -> (f64, f64) {
    let lat = origin.lat + (y / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon + (x / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    (lat, lon)
}

/// Serializes a network back to OSM XML. Networks without a geodetic origin
/// are anchored at (0, 0).
pub fn write_osm_xml(net: &RawRoadNetwork) -> String {
    let origin = net.origin.unwrap_or(GeoOrigin { lat: 0.0, lon: 0.0 });
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n");
    for n in &net.nodes {
        let (lat, lon) = unproject(origin, n.x, n.y);
        out.push_str(&format!(
            "  <node id=\"{}\" lat=\"{:.12}\" lon=\"{:.12}\"/>\n",
            n.id, lat, lon
        ));
    }
    for w in &net.ways {
        out.push_str(&format!("  <way id=\"{}\">\n", w.id));
        for r in &w.nodes {
            out.push_str(&format!("    <nd ref=\"{r}\"/>\n"));
        }
        out.push_str(&format!("    <tag k=\"highway\" v=\"{}\"/>\n", w.highway));
        if w.oneway {
            out.push_str("    <tag k=\"oneway\" v=\"yes\"/>\n");
        }
        out.push_str("  </way>\n");
    }
    out.push_str("</osm>\n");
    out
}

fn attr<'a>(el: &roxmltree::Node<'a, '_>, name: &str, line: usize) -> Result<&'a str> {
    el.attribute(name)
        .ok_or_else(|| Error::parse(line, format!("<{}> missing attribute {name}", el.tag_name().name())))
}

fn int_attr(el: &roxmltree::Node, name: &str, line: usize) -> Result<i64> {
    let v = attr(el, name, line)?;
    v.parse()
        .map_err(|_| Error::parse(line, format!("attribute {name}={v:?} is not an integer")))
}

fn float_attr(el: &roxmltree::Node, name: &str, line: usize) -> Result<f64> {
    let v = attr(el, name, line)?;
    v.parse::<f64>()
        .ok()
        .filter(|f| f.is_finite())
        .ok_or_else(|| Error::parse(line, format!("attribute {name}={v:?} is not a number")))
}
