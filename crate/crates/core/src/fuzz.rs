//! Entry points shared by the fuzz targets and the seed-corpus test. Each
//! feeds arbitrary bytes to one parser or decoder; errors are expected,
//! panics are bugs.

use crate::bev::{decode_indexed_png, decode_point_cloud, BevMap, CameraModel, SemanticFrame};
use crate::pipeline::export::parse_lanelet_json;
use crate::pipeline::{HDMapDocument, PipelineConfig};
use crate::pose::parse_pose_csv;
use crate::skeleton::{build_skeleton, parse_network_json, parse_osm};
use crate::synthetic::ScenarioSpec;

/// Target names, matching the binaries under `fuzz/fuzz_targets`.
pub const TARGETS: [&str; 11] = [
    "network_json",
    "osm_xml",
    "pose_csv",
    "camera_txt",
    "indexed_png",
    "point_cloud",
    "semantic_frame",
    "pipeline_config",
    "map_document",
    "lanelet_json",
    "scenario_spec",
];

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

pub fn network_json(data: &[u8]) {
    if let Some(net) = text(data).and_then(|t| parse_network_json(t).ok()) {
        let _ = build_skeleton(&net);
    }
}

pub fn osm_xml(data: &[u8]) {
    if let Some(net) = text(data).and_then(|t| parse_osm(t).ok()) {
        let _ = build_skeleton(&net);
    }
}

pub fn pose_csv(data: &[u8]) {
    if let Some(t) = text(data) {
        let _ = parse_pose_csv(t);
    }
}

pub fn camera_txt(data: &[u8]) {
    if let Some(cam) = text(data).and_then(|t| CameraModel::parse(t).ok()) {
        assert_eq!(CameraModel::parse(&cam.to_text()).ok(), Some(cam));
    }
}

pub fn indexed_png(data: &[u8]) {
    if let Ok(raster) = decode_indexed_png(data) {
        let _ = BevMap::from_raster(&raster);
    }
}

pub fn point_cloud(data: &[u8]) {
    let _ = decode_point_cloud(data);
}

pub fn semantic_frame(data: &[u8]) {
    let _ = SemanticFrame::from_png(data);
}

pub fn pipeline_config(data: &[u8]) {
    if let Some(cfg) = text(data).and_then(|t| PipelineConfig::parse(t, std::path::Path::new("")).ok()) {
        let _ = cfg.validate();
    }
}

pub fn scenario_spec(data: &[u8]) {
    if let Some(spec) = text(data).and_then(|t| serde_json::from_str::<ScenarioSpec>(t).ok()) {
        let _ = spec.validate();
    }
}

pub fn map_document(data: &[u8]) {
    if let Some(doc) = text(data).and_then(|t| HDMapDocument::from_json(t).ok()) {
        let _ = HDMapDocument::from_json(&doc.to_json());
    }
}

pub fn lanelet_json(data: &[u8]) {
    if let Some(t) = text(data) {
        let _ = parse_lanelet_json(t);
    }
}

pub fn run(target: &str, data: &[u8]) {
    match target {
        "network_json" => network_json(data),
        "osm_xml" => osm_xml(data),
        "pose_csv" => pose_csv(data),
        "camera_txt" => camera_txt(data),
        "indexed_png" => indexed_png(data),
        "point_cloud" => point_cloud(data),
        "semantic_frame" => semantic_frame(data),
        "pipeline_config" => pipeline_config(data),
        "map_document" => map_document(data),
        "lanelet_json" => lanelet_json(data),
        "scenario_spec" => scenario_spec(data),
        other => panic!("unknown fuzz target {other}"),
    }
}
