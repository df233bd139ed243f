//! Lane regression: terminal particles are clustered into lanes, each
//! lane's ancestry is fit with a piecewise-linear center line in a
//! road-aligned frame, smoothed, and probed sideways for its boundaries.

mod dbscan;
mod piecewise;
mod spline;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bev::{BevMap, SemanticClass};
use crate::error::{Error, Result};
use crate::explorer::ParticleHistory;
use crate::geometry::Point2;
use crate::skeleton::{AtomicRoadStub, EdgeId, IntersectionRoi};

pub use dbscan::{cluster_count, dbscan};
pub use piecewise::{fit_piecewise, fit_piecewise_auto, solve_fixed, PiecewiseFit};
pub use spline::{NaturalSpline, SplineSegment};

/// Road-aligned frame: `s` along `heading` from `origin`, `d` to the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadFrame {
    pub origin: Point2,
    pub heading: f64,
}

impl RoadFrame {
    pub fn axis(&self) -> Point2 {
        Point2::from_angle(self.heading)
    }

    pub fn to_local(&self, p: Point2) -> (f64, f64) {
        let a = self.axis();
        let r = p - self.origin;
        (r.dot(a), r.dot(a.perp()))
    }

    pub fn to_map(&self, s: f64, d: f64) -> Point2 {
        let a = self.axis();
        self.origin + a * s + a.perp() * d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterLine {
    pub frame: RoadFrame,
    pub breakpoints: Vec<f64>,
    pub spline: NaturalSpline,
    pub spacing: f64,
    pub way_points: Vec<Point2>,
}

impl CenterLine {
    pub fn s_range(&self) -> (f64, f64) {
        let k = &self.spline.knots;
        (k[0], k[k.len() - 1])
    }

    fn stations(&self) -> Vec<f64> {
        stations(self.s_range(), self.spacing)
    }

    /// Unit tangent (map frame) at arclength station `s` of the road frame.
    pub fn tangent_at(&self, s: f64) -> Point2 {
        let a = self.frame.axis();
        (a + a.perp() * self.spline.derivative(s)).normalized()
    }

    /// Unit tangents at every way point.
    pub fn tangents(&self) -> Vec<Point2> {
        self.stations().into_iter().map(|s| self.tangent_at(s)).collect()
    }

    pub fn start_tangent(&self) -> Point2 {
        self.tangent_at(self.s_range().0)
    }

    pub fn end_tangent(&self) -> Point2 {
        self.tangent_at(self.s_range().1)
    }

    /// Mean lateral offset of the way points in the road frame.
    pub fn mean_offset(&self) -> f64 {
        let n = self.way_points.len().max(1) as f64;
        self.way_points.iter().map(|p| self.frame.to_local(*p).1).sum::<f64>() / n
    }
}

fn stations((s0, s1): (f64, f64), spacing: f64) -> Vec<f64> {
    let n = ((s1 - s0) / spacing).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|i| s0 + i as f64 * spacing).collect();
    if s1 - out[out.len() - 1] > 1e-9 {
        out.push(s1);
    }
    out
}

/// Spline through the piecewise-linear values at `knots`.
pub fn smooth_natural_spline(fit: &PiecewiseFit, knots: &[f64]) -> Result<NaturalSpline> {
    let values: Vec<f64> = knots.iter().map(|&s| fit.eval(s)).collect();
    NaturalSpline::new(knots, &values)
}

/// Endpoints, breakpoints, and extra knots so no interval exceeds
/// `max_spacing`; a spline through breakpoints alone overshoots the
/// piecewise-linear fit on long straight pieces next to a corner.
pub fn regression_knots(fit: &PiecewiseFit, max_spacing: f64) -> Vec<f64> {
    let mut anchors = vec![fit.s_min];
    anchors.extend(fit.breakpoints.iter().copied());
    anchors.push(fit.s_max);
    let mut knots = Vec::new();
    for w in anchors.windows(2) {
        let pieces = ((w[1] - w[0]) / max_spacing).ceil().max(1.0) as usize;
        for i in 0..pieces {
            knots.push(w[0] + (w[1] - w[0]) * i as f64 / pieces as f64);
        }
    }
    knots.push(fit.s_max);
    // Knots much closer than the spacing make the interpolant ring.
    let min_gap = max_spacing / 5.0;
    knots.dedup_by(|b, a| *b - *a < min_gap);
    if let Some(last) = knots.last_mut() {
        *last = fit.s_max;
    }
    knots
}

pub fn center_line(frame: RoadFrame, fit: &PiecewiseFit, knot_spacing: f64, spacing: f64) -> Result<CenterLine> {
    let knots = regression_knots(fit, knot_spacing);
    let spline = smooth_natural_spline(fit, &knots)?;
    let way_points = stations((fit.s_min, fit.s_max), spacing)
        .into_iter()
        .map(|s| frame.to_map(s, spline.eval(s)))
        .collect();
    Ok(CenterLine {
        frame,
        breakpoints: fit.breakpoints.clone(),
        spline,
        spacing,
        way_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub max_offset: f64,
    pub min_offset: f64,
    /// Consecutive cells of another drivable class (or unknown) that end a probe.
    pub run_length: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            max_offset: 8.0,
            min_offset: 0.3,
            run_length: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneBoundarySamples {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// Set where no boundary was found within the probe range.
    pub left_clamped: Vec<bool>,
    pub right_clamped: Vec<bool>,
    /// Raster class that stopped each probe (unknown when clamped).
    pub left_class: Vec<SemanticClass>,
    pub right_class: Vec<SemanticClass>,
    pub left_line: Vec<Point2>,
    pub right_line: Vec<Point2>,
}

/// Marches from `origin` along `dir` until a marking, a curb, or a run of
/// another drivable class / unknown cells. Returns (offset, class, clamped).
fn probe_side(bev: &BevMap, origin: Point2, dir: Point2, cfg: &ProbeConfig) -> (f64, SemanticClass, bool) {
    let cell = bev.cell_size();
    let steps = (cfg.max_offset / cell).round() as usize;
    let mut own: Option<SemanticClass> = bev.label_at(origin).is_drivable_area().then(|| bev.label_at(origin));
    let mut run: Option<(usize, SemanticClass, usize)> = None;
    for k in 1..=steps {
        let label = bev.label_at(origin + dir * (k as f64 * cell));
        if matches!(label, SemanticClass::LmSolid | SemanticClass::LmDashed | SemanticClass::Curb) {
            return (((k as f64 - 0.5) * cell).max(cfg.min_offset), label, false);
        }
        let foreign = match label {
            SemanticClass::Unknown => true,
            c if c.is_drivable_area() => match own {
                None => {
                    own = Some(c);
                    false
                }
                Some(o) => o != c,
            },
            _ => false,
        };
        if foreign {
            let r = match run {
                Some((start, c, len)) if c == label => (start, c, len + 1),
                _ => (k, label, 1),
            };
            if r.2 >= cfg.run_length {
                return (((r.0 as f64 - 0.5) * cell).max(cfg.min_offset), label, false);
            }
            run = Some(r);
        } else {
            run = None;
        }
    }
    (cfg.max_offset, SemanticClass::Unknown, true)
}

pub fn probe_width(center: &CenterLine, bev: &BevMap, cfg: &ProbeConfig) -> LaneBoundarySamples {
    let mut out = LaneBoundarySamples {
        left: Vec::new(),
        right: Vec::new(),
        left_clamped: Vec::new(),
        right_clamped: Vec::new(),
        left_class: Vec::new(),
        right_class: Vec::new(),
        left_line: Vec::new(),
        right_line: Vec::new(),
    };
    for (wp, t) in center.way_points.iter().zip(center.tangents()) {
        let n = t.perp();
        let (l, lc, lf) = probe_side(bev, *wp, n, cfg);
        let (r, rc, rf) = probe_side(bev, *wp, -n, cfg);
        out.left.push(l);
        out.right.push(r);
        out.left_clamped.push(lf);
        out.right_clamped.push(rf);
        out.left_class.push(lc);
        out.right_class.push(rc);
        out.left_line.push(*wp + n * l);
        out.right_line.push(*wp - n * r);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub center: CenterLine,
    pub boundary: LaneBoundarySamples,
}

impl Lane {
    /// Left boundary followed by the reversed right boundary.
    pub fn polygon(&self) -> Vec<Point2> {
        let mut ring = self.boundary.left_line.clone();
        ring.extend(self.boundary.right_line.iter().rev());
        ring
    }
}

/// Lanes ordered left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicRoad {
    pub edge: EdgeId,
    pub lanes: Vec<Lane>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub eps: f64,
    pub min_pts: usize,
    pub max_breaks: usize,
    /// Penalty per breakpoint; default is derived from the data.
    pub lambda: Option<f64>,
    /// Way point spacing (m).
    pub spacing: f64,
    pub knot_spacing: f64,
    /// Pooled ancestry points are thinned to at most this many per lane.
    pub max_fit_points: usize,
    pub probe: ProbeConfig,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            eps: 1.0,
            min_pts: 5,
            max_breaks: 6,
            lambda: None,
            spacing: 1.0,
            knot_spacing: 5.0,
            max_fit_points: 3000,
            probe: ProbeConfig::default(),
        }
    }
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps > 0.0 && self.min_pts >= 1 && self.spacing > 0.0 && self.knot_spacing > 0.0 && self.max_fit_points >= 4 {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid regression config: {self:?}")))
        }
    }
}

/// Ancestry positions of every terminal particle in each cluster, in
/// (step, index) order with shared ancestors counted once.
pub fn cluster_ancestry(history: &ParticleHistory, labels: &[Option<usize>]) -> Vec<Vec<Point2>> {
    let k = cluster_count(labels);
    let mut nodes: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); k];
    for (t, label) in history.terminals.iter().zip(labels) {
        if let Some(c) = label {
            nodes[*c].extend(history.ancestry(*t));
        }
    }
    nodes
        .into_iter()
        .map(|set| {
            set.into_iter()
                .map(|(s, i)| history.steps[s].particles[i].position())
                .collect()
        })
        .collect()
}

/// Station along the straight continuation from `s` (direction `dir`, +1
/// forward or -1 backward) where the fitted line enters `roi`, if it does
/// within `MAX_EXTENSION` meters.
fn extension_to(frame: &RoadFrame, fit: &PiecewiseFit, s: f64, dir: f64, roi: &IntersectionRoi) -> Option<f64> {
    let at = |t: f64| {
        let u = s + dir * t;
        frame.to_map(u, fit.eval(u))
    };
    if roi.contains(at(0.0)) {
        return None;
    }
    let mut hi = (1..=(MAX_EXTENSION as usize)).map(|i| i as f64).find(|&t| roi.contains(at(t)))?;
    let mut lo = hi - 1.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if roi.contains(at(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(s + dir * lo)
}

const MAX_EXTENSION: f64 = 10.0;

/// Intersection regions at either end of the road being regressed.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoadEnds<'a> {
    pub source: Option<&'a IntersectionRoi>,
    pub target: Option<&'a IntersectionRoi>,
}

/// Once particles reach the target region the survivors are those that had
/// furthest to go, so the fit stops at the earliest arrival station. The
/// fitted line is then continued straight to both end regions.
pub fn build_atomic_road(
    history: &ParticleHistory,
    bev: &BevMap,
    edge: &AtomicRoadStub,
    ends: RoadEnds<'_>,
    cfg: &RegressionConfig,
) -> Result<AtomicRoad> {
    let terminals: Vec<Point2> = history.terminal_particles().iter().map(|p| p.position()).collect();
    let labels = dbscan(&terminals, cfg.eps, cfg.min_pts);
    let frame = RoadFrame {
        origin: edge.polyline[0],
        heading: edge.bearing(),
    };
    let pooled = cluster_ancestry(history, &labels);
    let lanes: Vec<Option<Lane>> = pooled
        .par_iter()
        .map(|pts| -> Result<Option<Lane>> {
            let inside = |p: &Point2| ends.target.is_some_and(|roi| roi.contains(*p));
            let cut = pts
                .iter()
                .filter(|p| inside(p))
                .map(|p| frame.to_local(*p).0)
                .fold(f64::INFINITY, f64::min);
            let kept: Vec<(f64, f64)> = pts
                .iter()
                .map(|p| frame.to_local(*p))
                .filter(|&(s, _)| s < cut)
                .collect();
            let stride = kept.len().div_ceil(cfg.max_fit_points).max(1);
            let local: Vec<(f64, f64)> = kept.into_iter().step_by(stride).collect();
            let mut fit = match fit_piecewise_auto(&local, cfg.max_breaks, cfg.lambda) {
                Ok(f) => f,
                Err(Error::UnderDetermined { .. } | Error::Degenerate(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            if let Some(s) = ends.source.and_then(|roi| extension_to(&frame, &fit, fit.s_min, -1.0, roi)) {
                fit.s_min = s;
            }
            if let Some(s) = ends.target.and_then(|roi| extension_to(&frame, &fit, fit.s_max, 1.0, roi)) {
                fit.s_max = s;
            }
            let center = center_line(frame, &fit, cfg.knot_spacing, cfg.spacing)?;
            let boundary = probe_width(&center, bev, &cfg.probe);
            Ok(Some(Lane { center, boundary }))
        })
        .collect::<Result<_>>()?;
    let mut lanes: Vec<Lane> = lanes.into_iter().flatten().collect();
    lanes.sort_by(|a, b| b.center.mean_offset().total_cmp(&a.center.mean_offset()));
    Ok(AtomicRoad { edge: edge.id, lanes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bev::GridSpec;

    /// DA-Center band over y in [y0, y1) with solid edges two cells wide.
    fn band(y0: f64, y1: f64) -> BevMap {
        let mut bev = BevMap::new(GridSpec::default());
        let (c0, c1) = ((y0 / 0.1).round() as i64, (y1 / 0.1).round() as i64);
        for ix in -20..220 {
            for iy in (c0 - 2)..(c1 + 2) {
                let c = if iy < c0 || iy >= c1 { SemanticClass::LmSolid } else { SemanticClass::DaCenter };
                bev.set_cell(ix, iy, c);
            }
        }
        bev
    }

    fn straight_center(d: f64) -> CenterLine {
        let fit = PiecewiseFit {
            breakpoints: vec![],
            intercept: d,
            slope: 0.0,
            hinge: vec![],
            loss: 0.0,
            s_min: 0.0,
            s_max: 20.0,
        };
        center_line(RoadFrame { origin: Point2::new(0.0, 0.0), heading: 0.0 }, &fit, 5.0, 1.0).unwrap()
    }

    #[test]
    fn centered_probe_is_symmetric() {
        let bev = band(-1.5, 1.5);
        let b = probe_width(&straight_center(0.05), &bev, &ProbeConfig::default());
        for (l, r) in b.left.iter().zip(&b.right) {
            assert!((l - 1.45).abs() <= 0.1 + 1e-9 && (r - 1.55).abs() <= 0.1 + 1e-9, "{l} {r}");
            assert!((l - r).abs() <= 0.2 + 1e-9);
        }
        assert!(b.left_class.iter().all(|c| *c == SemanticClass::LmSolid));
    }

    #[test]
    fn offset_center_probe() {
        let bev = band(-1.5, 1.5);
        let b = probe_width(&straight_center(0.55), &bev, &ProbeConfig::default());
        for (l, r) in b.left.iter().zip(&b.right) {
            assert!((l - 0.95).abs() <= 0.1 + 1e-9 && (r - 2.05).abs() <= 0.1 + 1e-9, "{l} {r}");
        }
    }

    #[test]
    fn open_area_clamps() {
        let mut bev = BevMap::new(GridSpec::default());
        for ix in -100..300 {
            for iy in -120..120 {
                bev.set_cell(ix, iy, SemanticClass::DaCenter);
            }
        }
        let b = probe_width(&straight_center(0.0), &bev, &ProbeConfig::default());
        assert!(b.left.iter().chain(&b.right).all(|v| *v == 8.0));
        assert!(b.left_clamped.iter().chain(&b.right_clamped).all(|f| *f));
    }

    #[test]
    fn knots_subdivide_long_pieces() {
        let fit = PiecewiseFit {
            breakpoints: vec![50.0],
            intercept: 0.0,
            slope: 0.0,
            hinge: vec![0.1],
            loss: 0.0,
            s_min: 0.0,
            s_max: 100.0,
        };
        let k = regression_knots(&fit, 5.0);
        assert_eq!(k.len(), 21);
        assert!(k.contains(&50.0));
        let sp = smooth_natural_spline(&fit, &k).unwrap();
        let worst = (0..=1000)
            .map(|i| i as f64 * 0.1)
            .map(|s| (sp.eval(s) - fit.eval(s)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.15, "{worst}");
    }

    #[test]
    fn empty_history_gives_empty_road() {
        let h = ParticleHistory {
            n_particles: 0,
            steps: vec![],
            terminals: vec![],
            truncated: false,
        };
        let edge = AtomicRoadStub {
            id: 3,
            way_id: 1,
            source: 1,
            target: 2,
            polyline: vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)],
            twin: None,
        };
        let road = build_atomic_road(&h, &BevMap::new(GridSpec::default()), &edge, RoadEnds::default(), &RegressionConfig::default()).unwrap();
        assert_eq!(road.edge, 3);
        assert!(road.lanes.is_empty());
    }
}
