use super::*;
use crate::bev::{build_ground_mesh, GroundFilter};
use crate::geometry::distance_to_polyline;

fn straight(length: f64) -> ScenarioSpec {
    ScenarioSpec::new(Layout::Straight { length })
}

fn count(bev: &BevMap, pred: impl Fn(SemanticClass) -> bool) -> usize {
    bev.cells().filter(|(_, c)| pred(*c)).count()
}

fn is_marking(c: SemanticClass) -> bool {
    matches!(c, SemanticClass::LmSolid | SemanticClass::LmDashed)
}

#[test]
fn straight_band_is_thirty_cells_with_solid_edges() {
    let b = generate(&straight(100.0)).unwrap();
    let ix = 500; // x = 50.05
    let column: Vec<SemanticClass> = (-20..20).map(|iy| b.bev.label_at_cell(ix, iy)).collect();
    let da: Vec<i64> = (-20..20)
        .filter(|&iy| b.bev.label_at_cell(ix, iy) == SemanticClass::DaCenter)
        .collect();
    assert_eq!(da.len(), 30, "{column:?}");
    assert_eq!((da[0], da[29]), (-15, 14));
    for iy in [-17, -16, 15, 16] {
        assert_eq!(b.bev.label_at_cell(ix, iy), SemanticClass::LmSolid);
    }
    for iy in [-18, 17] {
        assert_eq!(b.bev.label_at_cell(ix, iy), SemanticClass::Unknown);
    }
    assert_eq!(b.truth.roads.len(), 1);
    let lanes = b.truth.roads.values().next().unwrap();
    assert_eq!(lanes.len(), 1);
    // Clipped at the dead-end squares.
    let c = &lanes[0].center;
    assert!((c[0].x - 5.0).abs() < 1e-6 && (c[c.len() - 1].x - 95.0).abs() < 1e-6);
    assert!(b.truth.connections.is_empty());
}

#[test]
fn fork_shares_the_approach() {
    let spec = ScenarioSpec::new(Layout::Fork {
        angle: 0.3,
        position: 50.0,
        length: 100.0,
    });
    let b = generate(&spec).unwrap();
    let lanes = b.truth.roads.values().next().unwrap();
    assert_eq!(lanes.len(), 2);
    for (p, q) in lanes[0].center.iter().zip(&lanes[1].center) {
        if p.x <= 50.0 {
            assert!(p.distance(*q) < 1e-9);
        }
    }
    let (a, z) = (lanes[0].center.last().unwrap(), lanes[1].center.last().unwrap());
    assert!((a.y - 1.6).abs() < 1e-9 && (z.y + 1.6).abs() < 1e-9);
    // A divider appears between the branches.
    assert_eq!(b.bev.label_at(Point2::new(85.0, 0.05)), SemanticClass::LmSolid);
    assert_eq!(b.bev.label_at(Point2::new(30.0, 0.05)), SemanticClass::DaCenter);
}

#[test]
fn dropout_halves_marking_cells() {
    let base = straight(1000.0);
    let full = count(&generate(&base).unwrap().bev, is_marking) as f64;
    let mut spec = base.clone();
    spec.dropout = 0.5;
    let b = generate(&spec).unwrap();
    let kept = count(&b.bev, is_marking) as f64;
    let ratio = kept / full;
    assert!((ratio - 0.5).abs() <= 0.05, "ratio {ratio}");
    // Dropped paint reads as road surface, never as unknown.
    assert_eq!(count(&b.bev, |c| c == SemanticClass::DaCenter), count(&generate(&base).unwrap().bev, |c| c == SemanticClass::DaCenter) + (full - kept) as usize);
}

#[test]
fn dashed_markings_alternate() {
    let mut spec = straight(100.0);
    spec.markings.outer = MarkingStyle::Dashed;
    let b = generate(&spec).unwrap();
    let along: Vec<bool> = (0..1000)
        .map(|ix| b.bev.label_at_cell(ix, 15) == SemanticClass::LmDashed)
        .collect();
    let on = along.iter().filter(|v| **v).count();
    assert!((on as f64 / 1000.0 - 0.5).abs() < 0.02);
}

#[test]
fn corrupt_flip_count_is_binomial() {
    let mut bev = BevMap::new(GridSpec::new(Point2::new(0.0, 0.0), 0.1));
    for ix in 0..100 {
        for iy in 0..100 {
            bev.set_cell(ix, iy, SemanticClass::DaCenter);
        }
    }
    let total = count(&bev, |c| c != SemanticClass::Unknown);
    assert_eq!(total, 10_000);
    assert_eq!(corrupt(&bev, 0.0, 7).to_raster(), bev.to_raster());
    let out = corrupt(&bev, 0.1, 7);
    let flipped = (0..100)
        .flat_map(|ix| (0..100).map(move |iy| (ix, iy)))
        .filter(|&(ix, iy)| out.label_at_cell(ix, iy) != SemanticClass::DaCenter)
        .count();
    assert!((900..=1100).contains(&flipped), "{flipped}");
    assert_eq!(out.to_raster(), corrupt(&bev, 0.1, 7).to_raster());
    assert_ne!(out.to_raster(), corrupt(&bev, 0.1, 8).to_raster());
}

#[test]
fn generation_is_deterministic() {
    let mut spec = ScenarioSpec::new(Layout::Grid4 { block: 40.0 });
    spec.dropout = 0.3;
    spec.flip_rate = 0.01;
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.bev.to_raster(), b.bev.to_raster());
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.poses, b.poses);
    spec.seed += 1;
    assert_ne!(generate(&spec).unwrap().bev.to_raster(), a.bev.to_raster());
}

/// Cells of the drivable band that touch a non-drivable cell.
fn band_edge_cells(bev: &BevMap) -> Vec<Point2> {
    let da = |ix, iy| bev.label_at_cell(ix, iy) == SemanticClass::DaCenter;
    bev.cells()
        .filter(|((ix, iy), c)| {
            *c == SemanticClass::DaCenter
                && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dx, dy)| !da(ix + dx, iy + dy))
        })
        .map(|((ix, iy), _)| bev.grid().center(ix, iy))
        .collect()
}

#[test]
fn raster_matches_truth_polylines() {
    let spec = ScenarioSpec::new(Layout::Curved {
        radius: 30.0,
        angle: PI / 2.0,
        lead: 20.0,
    });
    let b = generate(&spec).unwrap();
    let lane = &b.truth.roads.values().next().unwrap()[0];
    let rois: Vec<&Vec<Point2>> = b.skeleton.intersections.values().map(|i| &i.roi).collect();
    let near_roi = |p: Point2| rois.iter().any(|r| r.iter().any(|v| v.distance(p) < 12.0) || point_in_polygon(p, r));
    let cell = 0.1;
    // Truth to raster: each boundary point has a band-edge cell within a cell.
    let edges = band_edge_cells(&b.bev);
    for p in lane.left.iter().chain(&lane.right) {
        let d = edges.iter().map(|e| e.distance(*p)).fold(f64::INFINITY, f64::min);
        assert!(d <= cell, "truth point {p:?} is {d} from the raster edge");
    }
    // Raster to truth: band-edge cells away from the clipped ends lie on a boundary.
    for e in edges.iter().filter(|e| !near_roi(**e)) {
        let d = distance_to_polyline(*e, &lane.left).min(distance_to_polyline(*e, &lane.right));
        assert!(d <= cell, "edge cell {e:?} is {d} from the truth");
    }
}

#[test]
fn grid_and_star_connection_counts() {
    let g = generate(&ScenarioSpec::new(Layout::Grid4 { block: 40.0 })).unwrap();
    assert_eq!(g.truth.roads.len(), 8);
    assert_eq!(g.truth.connections.len(), 12);
    let s = generate(&ScenarioSpec::new(Layout::Star6 { arm: 40.0 })).unwrap();
    assert_eq!(s.truth.roads.len(), 12);
    assert_eq!(s.truth.connections.len(), 30);
    for c in &s.truth.connections {
        let inc = s.truth.roads[&c.in_edge][c.in_lane].center.last().copied().unwrap();
        let out = s.truth.roads[&c.out_edge][c.out_lane].center[0];
        assert!(c.curve[0].distance(inc) < 1e-9);
        assert!(c.curve.last().unwrap().distance(out) < 1e-9);
    }
}

#[test]
fn arc_connection_is_tangent_and_circular() {
    let p0 = Point2::new(-8.0, -1.6);
    let p2 = Point2::new(1.6, 8.0);
    let curve = arc_connection(p0, Point2::new(1.0, 0.0), p2, Point2::new(0.0, 1.0), 41);
    let center = Point2::new(-8.0, 8.0);
    for p in &curve {
        assert!((p.distance(center) - 9.6).abs() < 1e-9);
    }
    assert!((curve[1] - curve[0]).normalized().distance(Point2::new(1.0, 0.0)) < 0.05);
    let straight = arc_connection(p0, Point2::new(1.0, 0.0), Point2::new(8.0, -1.6), Point2::new(1.0, 0.0), 5);
    assert!(straight.iter().all(|p| (p.y + 1.6).abs() < 1e-12));
}

#[test]
fn sine_cloud_lies_on_the_surface() {
    let topo = Topography::Sine {
        amplitude: 0.2,
        wavelength: 40.0,
    };
    let pose = Pose {
        z: topo.height(12.0, 3.0),
        ..Pose::planar(0.0, 12.0, 3.0, 0.4)
    };
    let render = RenderSpec::default();
    let cloud = ground_cloud(&pose, &topo, &render, 3);
    let mesh = build_ground_mesh(&cloud, &GroundFilter::for_camera(1.5, (0.0, 50.0), (-20.0, 20.0))).unwrap();
    assert!(mesh.vertices.len() * 20 >= cloud.len() * 19);
    for v in &mesh.vertices {
        let m = pose.vehicle_to_map(v);
        assert!((m.z - topo.height(m.x, m.y)).abs() < 1e-9);
    }
}

#[test]
fn rendered_frame_sees_the_road() {
    let spec = straight(100.0);
    let b = generate(&spec).unwrap();
    let cam = spec.render.camera();
    let pose = b.poses[20];
    let f = render_frame(&b.bev, &spec.topography, &cam, &pose, 480, 360);
    // Straight ahead, below the horizon.
    assert_eq!(f.class_at(240, 300), SemanticClass::DaCenter);
    // Sky.
    assert_eq!(f.class_at(240, 10), SemanticClass::Unknown);
    // A ground point maps back to its own label.
    let g = Point3::new(pose.x + 10.0, 1.6, 0.0);
    let (u, v) = cam.map_to_pixel(&pose, &g).unwrap();
    assert_eq!(f.class_at(u as u32, v as u32), SemanticClass::LmSolid);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = ScenarioSpec::new(Layout::Fork {
        angle: 0.3,
        position: 50.0,
        length: 100.0,
    });
    s.lanes_per_direction = 2;
    assert!(matches!(generate(&s), Err(Error::Spec(_))));
    let mut w = straight(100.0);
    w.lane_width = 5.5;
    assert!(matches!(w.validate(), Err(Error::Spec(_))));
    w.lane_width = 3.0;
    w.dropout = 1.5;
    assert!(w.validate().is_err());
    let parsed: ScenarioSpec = serde_json::from_str(r#"{"layout":{"kind":"star6"},"seed":3}"#).unwrap();
    assert_eq!(parsed.layout, Layout::Star6 { arm: 50.0 });
    assert!(serde_json::from_str::<ScenarioSpec>(r#"{"layout":{"kind":"hexagon"}}"#).is_err());
}

#[test]
fn bundle_round_trip() {
    let mut spec = straight(40.0);
    spec.frames = true;
    spec.render.width = 64;
    spec.render.height = 48;
    spec.render.focal = 50.0;
    spec.render.frame_stride = 10;
    spec.render.cloud_spacing = 3.0;
    let b = generate(&spec).unwrap();
    assert_eq!(b.frames.len(), b.clouds.len());
    assert!(!b.frames.is_empty());
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&b, dir.path()).unwrap();
    for f in BUNDLE_FILES {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert!(dir.path().join("frames/0000.png").is_file());
    assert!(dir.path().join("cloud_0000.bin").is_file());
    let r = read_bundle(dir.path()).unwrap();
    assert_eq!(r.truth, b.truth);
    assert_eq!(r.poses, b.poses);
    assert_eq!(r.frames, b.frames);
    assert_eq!(r.bev.label_at(Point2::new(20.0, 0.0)), SemanticClass::DaCenter);
    assert_eq!(r.bev.label_at(Point2::new(20.0, 1.65)), SemanticClass::LmSolid);
}
