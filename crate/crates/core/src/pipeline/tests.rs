use super::export::*;
use super::*;
use crate::synthetic::{generate, write_bundle, Layout, ScenarioSpec};

fn straight_bundle() -> (tempfile::TempDir, crate::synthetic::GroundTruthBundle) {
    let dir = tempfile::tempdir().unwrap();
    let b = generate(&ScenarioSpec::new(Layout::Straight { length: 60.0 })).unwrap();
    write_bundle(&b, dir.path()).unwrap();
    (dir, b)
}

#[test]
fn config_parsing_and_validation() {
    let (dir, _) = straight_bundle();
    let text = r#"
        seed = 9
        mode = "flat"
        [paths]
        skeleton = "skeleton.json"
        poses = "poses.csv"
        bev = "bev.png"
        [exploration]
        n_particles = 200
        [regression]
        eps = 1.5
    "#;
    let cfg = PipelineConfig::parse(text, dir.path()).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.exploration.n_particles, 200);
    assert_eq!(cfg.exploration.dt, 0.5);
    assert_eq!(cfg.regression.eps, 1.5);
    cfg.validate().unwrap();
    let reparsed = PipelineConfig::parse(&cfg.to_toml(), dir.path()).unwrap();
    assert_eq!(reparsed, cfg);

    let mesh = text.replace("\"flat\"", "\"mesh\"");
    let err = PipelineConfig::parse(&mesh, dir.path()).unwrap().validate().unwrap_err();
    assert!(err.is_validation() && err.to_string().contains("clouds"), "{err}");
    let missing = text.replace("bev.png", "nope.png");
    assert!(PipelineConfig::parse(&missing, dir.path()).unwrap().validate().is_err());
    assert!(PipelineConfig::parse("seed = 1\n[paths]\nskeleton = \"a\"\nposes = \"b\"\nbogus = 1\n", dir.path()).is_err());
}

#[test]
fn traversal_segmentation() {
    let (_, b) = straight_bundle();
    let t = traversals(&b.skeleton, &b.poses);
    assert_eq!(t.len(), 1);
    let t = t[0];
    // Poses from x = -5 every meter; the dead-end squares reach 5 m.
    assert!(b.poses[t.start].x > 5.0 && b.poses[t.start].x < 7.0);
    assert!(b.poses[t.end].x < 55.0 && b.poses[t.end].x > 53.0);
    assert_eq!(t.lead_in, 0);
}

#[test]
fn entry_strip_spans_the_lane() {
    let (_, b) = straight_bundle();
    let pose = Pose::planar(0.0, 10.0, 0.7, 0.0);
    let (center, width) = entry_strip(&b.bev, &pose, 8.0);
    assert!((width - 3.0).abs() <= 0.1, "{width}");
    assert!(center.y.abs() <= 0.05);
}

#[test]
fn straight_build_and_self_consistency() {
    let (dir, b) = straight_bundle();
    let mut cfg = PipelineConfig::for_bundle(dir.path(), crate::bev::ProjectionMode::Flat);
    cfg.seed = 42;
    let doc = cmd_build(&cfg).unwrap();
    assert_eq!(doc.roads.len(), 1);
    assert_eq!(doc.roads.values().next().unwrap().lanes.len(), 1);
    assert_eq!(doc.intersections.len(), 2);
    assert!(doc.intersections.values().all(|x| x.connections.is_empty()));
    doc.validate(&b.skeleton).unwrap();
    let text = doc.to_json();
    let back = HDMapDocument::from_json(&text).unwrap();
    assert_eq!(back, doc);
    assert_eq!(back.to_json(), text);

    let report = cmd_eval(&doc, &b.truth, &cfg.gate, false, false).unwrap();
    assert_eq!(report.aggregate.true_positives, 1);
    let mut bare = doc.clone();
    bare.provenance = None;
    assert!(cmd_eval(&bare, &b.truth, &cfg.gate, false, false).is_err());
    assert!(cmd_eval(&bare, &b.truth, &cfg.gate, false, true).is_ok());

    let geo: serde_json::Value = serde_json::from_str(&to_geojson(&doc)).unwrap();
    let kinds: Vec<&str> = geo["features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["geometry"]["type"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["LineString", "Polygon"]);

    let lanelets = parse_lanelet_json(&to_lanelet_json(&doc)).unwrap();
    let lane = &doc.roads.values().next().unwrap().lanes[0];
    let l = &lanelets.lanelets[0];
    for (a, p) in l.left.iter().zip(&lane.boundary.left_line) {
        assert!((a[0] - p.x).abs() <= 1e-9 && (a[1] - p.y).abs() <= 1e-9);
    }
    assert_eq!(l.centerline.len(), lane.center.way_points.len());
    assert!(to_svg(&doc).contains("<polygon"));
}

#[test]
fn empty_document_exports() {
    let doc = HDMapDocument::empty();
    let geo: serde_json::Value = serde_json::from_str(&to_geojson(&doc)).unwrap();
    assert_eq!(geo["type"], "FeatureCollection");
    assert_eq!(geo["features"].as_array().unwrap().len(), 0);
    assert!(parse_lanelet_json(&to_lanelet_json(&doc)).unwrap().lanelets.is_empty());
    assert!(to_svg(&doc).starts_with("<svg"));
    assert!(matches!("kml".parse::<ExportFormat>(), Err(Error::Usage(_))));
}

#[test]
fn lanelet_import_rejects_dangling_successors() {
    let text = r#"{"lanelets":[{"id":"a","edge":0,"lane":0,"left":[],"right":[],"centerline":[],"successors":["b"]}]}"#;
    assert!(parse_lanelet_json(text).is_err());
}
