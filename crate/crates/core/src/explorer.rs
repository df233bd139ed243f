//! Sequential Monte Carlo lane exploration: sedan-sized particles drive
//! through the semantic BEV of one atomic road until they reach the target
//! intersection region.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bev::{BevMap, SemanticClass};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Point2};
use crate::pose::Pose;
use crate::skeleton::IntersectionRoi;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl Particle {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Particle {
            x,
            y,
            phi: normalize_angle(phi),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    pub n_particles: usize,
    pub v_range: (f64, f64),
    /// Yaw-rate bounds, sampled per particle per step.
    pub omega_range: (f64, f64),
    pub dt: f64,
    pub footprint_length: f64,
    pub footprint_width: f64,
    /// Boundary fraction above which a particle is killed.
    pub kill_threshold: f64,
    pub stop_threshold: f64,
    /// Defaults to four times the nominal number of steps to the target.
    pub max_steps: Option<usize>,
    pub rng_seed: u64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            n_particles: 500,
            v_range: (0.9, 1.1),
            omega_range: (-0.2, 0.2),
            dt: 0.5,
            footprint_length: 3.0,
            footprint_width: 1.5,
            kill_threshold: 0.05,
            stop_threshold: 0.3,
            max_steps: None,
            rng_seed: 0,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_particles >= 1
            && self.v_range.0 <= self.v_range.1
            && self.omega_range.0 <= self.omega_range.1
            && self.dt > 0.0
            && self.footprint_length > 0.0
            && self.footprint_width > 0.0
            && self.kill_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid exploration config: {self:?}")))
        }
    }

    fn v_mid(&self) -> f64 {
        0.5 * (self.v_range.0 + self.v_range.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleStatus {
    Alive,
    /// Reached the target region; kept as a terminal particle.
    Arrived,
    TerminatedBoundary,
    TerminatedStop,
}

/// One propagation step. `parents[i]` indexes the previous step's record;
/// at step 0 every particle is its own root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub particles: Vec<Particle>,
    pub weights: Vec<f64>,
    pub parents: Vec<usize>,
    pub status: Vec<ParticleStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalRef {
    pub step: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleHistory {
    pub n_particles: usize,
    pub steps: Vec<StepRecord>,
    pub terminals: Vec<TerminalRef>,
    /// True when the step budget ran out with particles still moving.
    pub truncated: bool,
}

impl ParticleHistory {
    pub fn particle(&self, r: TerminalRef) -> Particle {
        self.steps[r.step].particles[r.index]
    }

    pub fn terminal_particles(&self) -> Vec<Particle> {
        self.terminals.iter().map(|&r| self.particle(r)).collect()
    }

    /// Positions along the ancestry of a terminal particle, terminal first.
    pub fn ancestry(&self, r: TerminalRef) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(r.step + 1);
        let (mut step, mut idx) = (r.step, r.index);
        loop {
            out.push((step, idx));
            if step == 0 {
                break;
            }
            idx = self.steps[step].parents[idx];
            step -= 1;
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Exploration died out before any particle reached the target.
#[derive(Debug, Clone)]
pub struct ExtinctionError {
    pub step: usize,
    pub history: ParticleHistory,
}

impl std::fmt::Display for ExtinctionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "particle extinction at step {}", self.step)
    }
}

impl std::error::Error for ExtinctionError {}

impl From<ExtinctionError> for Error {
    fn from(e: ExtinctionError) -> Self {
        Error::Extinction { step: e.step }
    }
}

/// Evenly spaced strip perpendicular to the start heading.
pub fn init_particles(start: &Pose, cfg: &ExplorationConfig, road_entry_width: f64) -> Result<Vec<Particle>> {
    if !(road_entry_width > 0.0) {
        return Err(Error::Validation(format!(
            "road entry width must be positive, got {road_entry_width}"
        )));
    }
    let n = cfg.n_particles;
    let left = Point2::from_angle(start.yaw).perp();
    let c = start.position();
    Ok((0..n)
        .map(|i| {
            let t = if n == 1 {
                0.0
            } else {
                -0.5 * road_entry_width + road_entry_width * i as f64 / (n - 1) as f64
            };
            let p = c + left * t;
            Particle::new(p.x, p.y, start.yaw)
        })
        .collect())
}

pub fn predict(p: &Particle, v: f64, omega: f64, dt: f64) -> Particle {
    let heading = p.phi + omega;
    Particle {
        x: p.x + heading.cos() * v * dt,
        y: p.y + heading.sin() * v * dt,
        phi: normalize_angle(p.phi + omega * dt),
    }
}

/// Body-frame sample points covering the footprint, one per map cell.
#[derive(Debug, Clone)]
pub struct Footprint {
    offsets: Vec<Point2>,
}

impl Footprint {
    pub fn new(length: f64, width: f64, cell_size: f64) -> Self {
        let nl = ((length / cell_size).round() as usize).max(1);
        let nw = ((width / cell_size).round() as usize).max(1);
        let mut offsets = Vec::with_capacity(nl * nw);
        for i in 0..nl {
            for j in 0..nw {
                offsets.push(Point2::new(
                    -0.5 * length + (i as f64 + 0.5) * length / nl as f64,
                    -0.5 * width + (j as f64 + 0.5) * width / nw as f64,
                ));
            }
        }
        Footprint { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn cells<'a>(&'a self, p: &Particle) -> impl Iterator<Item = Point2> + 'a {
        let (s, c) = p.phi.sin_cos();
        let (x, y) = (p.x, p.y);
        self.offsets
            .iter()
            .map(move |o| Point2::new(x + c * o.x - s * o.y, y + s * o.x + c * o.y))
    }
}

/// Label fractions under a footprint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overlap {
    pub drivable: f64,
    pub boundary: f64,
    pub stop: f64,
    pub covered: f64,
}

pub fn overlap(p: &Particle, bev: &BevMap, footprint: &Footprint) -> Overlap {
    let (mut drivable, mut boundary, mut stop, mut covered) = (0usize, 0usize, 0usize, 0usize);
    for q in footprint.cells(p) {
        let label = bev.label_at(q);
        if label != SemanticClass::Unknown {
            covered += 1;
        }
        if label.is_traversable() {
            drivable += 1;
        }
        if label.is_hard_boundary() {
            boundary += 1;
        }
        if label == SemanticClass::StopLine {
            stop += 1;
        }
    }
    let n = footprint.len().max(1) as f64;
    Overlap {
        drivable: drivable as f64 / n,
        boundary: boundary as f64 / n,
        stop: stop as f64 / n,
        covered: covered as f64 / n,
    }
}

/// Weight from label fractions. Dashed markings, crosswalks and stop lines
/// count as drivable.
pub fn weight_from_overlap(o: &Overlap, kill_threshold: f64, stop_threshold: f64) -> (f64, ParticleStatus) {
    if o.covered == 0.0 || o.boundary > kill_threshold {
        return (0.0, ParticleStatus::TerminatedBoundary);
    }
    let w = (o.drivable * (1.0 - (o.boundary / kill_threshold).clamp(0.0, 1.0))).clamp(0.0, 1.0);
    if o.stop > stop_threshold {
        (w, ParticleStatus::TerminatedStop)
    } else {
        (w, ParticleStatus::Alive)
    }
}

pub fn weigh(p: &Particle, bev: &BevMap, cfg: &ExplorationConfig) -> (f64, ParticleStatus) {
    let fp = Footprint::new(cfg.footprint_length, cfg.footprint_width, bev.cell_size());
    weight_from_overlap(&overlap(p, bev, &fp), cfg.kill_threshold, cfg.stop_threshold)
}

/// Low-variance resampling: `n` draws with a single offset `u0 ∈ [0, 1)`.
pub fn systematic_resample(weights: &[f64], n: usize, u0: f64) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Extinction { step: 0 });
    }
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0] / total;
    let mut i = 0;
    for k in 0..n {
        let u = (u0 + k as f64) / n as f64;
        while u >= cum && i + 1 < weights.len() {
            i += 1;
            cum += weights[i] / total;
        }
        // Skip zero-weight entries that floating-point accumulation lands on.
        while weights[i] == 0.0 && i + 1 < weights.len() {
            i += 1;
            cum += weights[i] / total;
        }
        out.push(i);
    }
    Ok(out)
}

pub fn resample<R: Rng>(weights: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let u0: f64 = rng.gen();
    systematic_resample(weights, n, u0)
}

fn default_max_steps(start: &Pose, roi: &IntersectionRoi, cfg: &ExplorationConfig) -> usize {
    let n = roi.polygon.len().max(1) as f64;
    let centroid = roi
        .polygon
        .iter()
        .fold(Point2::default(), |a, &b| a + b * (1.0 / n));
    let dist = start.position().distance(centroid);
    let nominal = dist / (cfg.v_mid() * cfg.dt).max(1e-9);
    ((4.0 * nominal).ceil() as usize).max(50)
}

pub fn explore(
    bev: &BevMap,
    start: &Pose,
    target_roi: &IntersectionRoi,
    cfg: &ExplorationConfig,
    road_entry_width: f64,
) -> std::result::Result<ParticleHistory, ExtinctionError> {
    let initial = init_particles(start, cfg, road_entry_width).unwrap_or_else(|_| {
        init_particles(start, cfg, cfg.footprint_width).expect("positive footprint width")
    });
    let n = cfg.n_particles;
    let footprint = Footprint::new(cfg.footprint_length, cfg.footprint_width, bev.cell_size());
    let max_steps = cfg
        .max_steps
        .unwrap_or_else(|| default_max_steps(start, target_roi, cfg));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut history = ParticleHistory {
        n_particles: n,
        steps: Vec::new(),
        terminals: Vec::new(),
        truncated: false,
    };

    let classify = |p: &Particle| -> (f64, ParticleStatus) {
        let (w, status) = weight_from_overlap(
            &overlap(p, bev, &footprint),
            cfg.kill_threshold,
            cfg.stop_threshold,
        );
        match status {
            ParticleStatus::TerminatedBoundary => (w, status),
            _ if target_roi.contains(p.position()) => (w, ParticleStatus::Arrived),
            // Vehicles cross stop lines; the pause only matters at the target.
            ParticleStatus::TerminatedStop if w > 0.0 => (w, ParticleStatus::Alive),
            ParticleStatus::Alive if w > 0.0 => (w, ParticleStatus::Alive),
            _ => (0.0, ParticleStatus::TerminatedBoundary),
        }
    };

    let record = |step: usize,
                  particles: Vec<Particle>,
                  parents: Vec<usize>,
                  history: &mut ParticleHistory| {
        let scored: Vec<(f64, ParticleStatus)> = particles.par_iter().map(classify).collect();
        let (weights, status): (Vec<f64>, Vec<ParticleStatus>) = scored.into_iter().unzip();
        for (i, s) in status.iter().enumerate() {
            if *s == ParticleStatus::Arrived {
                history.terminals.push(TerminalRef { step, index: i });
            }
        }
        history.steps.push(StepRecord {
            step,
            particles,
            weights,
            parents,
            status,
        });
    };

    // Step 0 only marks arrivals; the strip straddles the road edges by
    // construction, so it is not culled before the first move.
    let arrived0: Vec<ParticleStatus> = initial
        .iter()
        .map(|p| {
            if target_roi.contains(p.position()) {
                ParticleStatus::Arrived
            } else {
                ParticleStatus::Alive
            }
        })
        .collect();
    for (i, s) in arrived0.iter().enumerate() {
        if *s == ParticleStatus::Arrived {
            history.terminals.push(TerminalRef { step: 0, index: i });
        }
    }
    history.steps.push(StepRecord {
        step: 0,
        weights: vec![1.0 / n as f64; n],
        parents: (0..n).collect(),
        particles: initial,
        status: arrived0,
    });

    let mut arrived = history.terminals.len();
    for step in 1..=max_steps {
        let prev = history.steps.last().unwrap();
        let moving: Vec<usize> = (0..prev.particles.len())
            .filter(|&i| prev.status[i] == ParticleStatus::Alive)
            .collect();
        if moving.is_empty() {
            break;
        }
        let weights: Vec<f64> = moving.iter().map(|&i| prev.weights[i]).collect();
        let draws = match resample(&weights, n - arrived, &mut rng) {
            Ok(d) => d,
            Err(_) => {
                if arrived > 0 {
                    break;
                }
                return Err(ExtinctionError { step, history });
            }
        };
        let parents: Vec<usize> = draws.iter().map(|&d| moving[d]).collect();
        let mut next = Vec::with_capacity(parents.len());
        for &pi in &parents {
            let v = rng.gen_range(cfg.v_range.0..=cfg.v_range.1);
            let omega = rng.gen_range(cfg.omega_range.0..=cfg.omega_range.1);
            next.push(predict(&prev.particles[pi], v, omega, cfg.dt));
        }
        record(step, next, parents, &mut history);
        arrived = history.terminals.len();
        if step == max_steps {
            let last = history.steps.last().unwrap();
            history.truncated = last.status.contains(&ParticleStatus::Alive);
        }
    }

    if history.terminals.is_empty() {
        let last = history.steps.last().unwrap();
        if !last.status.contains(&ParticleStatus::Alive) || history.truncated {
            let step = history.steps.len() - 1;
            return Err(ExtinctionError { step, history });
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bev::GridSpec;

    fn corridor(width: f64, length: f64) -> BevMap {
        let grid = GridSpec::default();
        let mut bev = BevMap::new(grid);
        let half = (width / 0.1 / 2.0).round() as i64;
        for ix in -50..((length / 0.1) as i64 + 150) {
            for iy in (-half - 2)..(half + 2) {
                let class = if iy < -half || iy >= half {
                    SemanticClass::LmSolid
                } else {
                    SemanticClass::DaCenter
                };
                bev.set_cell(ix, iy, class);
            }
        }
        bev
    }

    fn square_roi(cx: f64, half: f64) -> IntersectionRoi {
        IntersectionRoi {
            intersection_id: 1,
            polygon: vec![
                Point2::new(cx - half, -half),
                Point2::new(cx + half, -half),
                Point2::new(cx + half, half),
                Point2::new(cx - half, half),
            ],
        }
    }

    #[test]
    fn init_strip_examples() {
        let cfg = ExplorationConfig {
            n_particles: 3,
            ..Default::default()
        };
        let ps = init_particles(&Pose::planar(0.0, 0.0, 0.0, 0.0), &cfg, 2.0).unwrap();
        let ys: Vec<f64> = ps.iter().map(|p| p.y).collect();
        assert_eq!(ys, vec![-1.0, 0.0, 1.0]);
        assert!(ps.iter().all(|p| p.x == 0.0 && p.phi == 0.0));

        let one = ExplorationConfig {
            n_particles: 1,
            ..Default::default()
        };
        let ps = init_particles(&Pose::planar(0.0, 3.0, 4.0, 0.5), &one, 2.0).unwrap();
        assert_eq!(ps, vec![Particle::new(3.0, 4.0, 0.5)]);

        let big = ExplorationConfig::default();
        let ps = init_particles(&Pose::planar(0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2), &big, 12.0).unwrap();
        assert_eq!(ps.len(), 500);
        assert!((ps[0].x - 6.0).abs() < 1e-12 && (ps[499].x + 6.0).abs() < 1e-12);
        assert!(ps.iter().all(|p| p.y.abs() < 1e-12));
        assert!((ps[0].x - ps[1].x - 12.0 / 499.0).abs() < 1e-12);
        assert!(init_particles(&Pose::planar(0.0, 0.0, 0.0, 0.0), &big, 0.0).is_err());
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&Particle::new(0.0, 0.0, 0.0), 1.0, 0.0, 1.0), Particle::new(1.0, 0.0, 0.0));
        let p = predict(&Particle::new(0.0, 0.0, std::f64::consts::FRAC_PI_2), 2.0, 0.0, 0.5);
        assert!(p.x.abs() < 1e-15 && (p.y - 1.0).abs() < 1e-15);
        let p = predict(&Particle::new(1.0, 1.0, 0.1), 1.0, 0.2, 1.0);
        let h = 0.1f64 + 0.2;
        assert!((p.x - (1.0 + h.cos())).abs() < 1e-15);
        assert!((p.y - (1.0 + h.sin())).abs() < 1e-15);
        assert!((p.phi - h).abs() < 1e-15);
    }

    #[test]
    fn weigh_examples() {
        let bev = corridor(6.0, 20.0);
        let cfg = ExplorationConfig::default();
        let (w, s) = weigh(&Particle::new(5.0, 0.0, 0.0), &bev, &cfg);
        assert_eq!((w, s), (1.0, ParticleStatus::Alive));
        // Half the footprint on the solid edge band.
        let mut solid = BevMap::new(GridSpec::default());
        for ix in 0..100 {
            for iy in -20..20 {
                let c = if iy >= 0 { SemanticClass::LmSolid } else { SemanticClass::DaCenter };
                solid.set_cell(ix, iy, c);
            }
        }
        let (w, s) = weigh(&Particle::new(5.0, 0.0, 0.0), &solid, &cfg);
        assert_eq!((w, s), (0.0, ParticleStatus::TerminatedBoundary));
        let (w, s) = weigh(&Particle::new(500.0, 0.0, 0.0), &solid, &cfg);
        assert_eq!((w, s), (0.0, ParticleStatus::TerminatedBoundary));
    }

    #[test]
    fn weigh_formula_matches_cell_count() {
        // A footprint aligned to the grid covers exactly 30 x 15 cells:
        // 360 DA, 9 LM-Solid, 81 unknown -> 0.8 and 0.02.
        let mut bev = BevMap::new(GridSpec::default());
        let mut idx = 0;
        for ix in 0..30 {
            for iy in 0..15 {
                let c = match idx {
                    0..=359 => SemanticClass::DaLeft,
                    360..=368 => SemanticClass::LmSolid,
                    _ => SemanticClass::Unknown,
                };
                bev.set_cell(ix, iy, c);
                idx += 1;
            }
        }
        let p = Particle::new(1.5, 0.75, 0.0);
        let fp = Footprint::new(3.0, 1.5, 0.1);
        assert_eq!(fp.len(), 450);
        let o = overlap(&p, &bev, &fp);
        let cells_da = fp.cells(&p).filter(|q| bev.label_at(*q).is_drivable_area()).count();
        assert_eq!(cells_da, 360);
        assert!((o.drivable - 0.8).abs() < 1e-12 && (o.boundary - 0.02).abs() < 1e-12);
        let (w, s) = weigh(&p, &bev, &ExplorationConfig::default());
        assert!((w - 0.8 * (1.0 - 0.4)).abs() < 1e-12);
        assert_eq!(s, ParticleStatus::Alive);
    }

    #[test]
    fn resample_examples() {
        let d = systematic_resample(&[1.0, 0.0, 0.0], 7, 0.3).unwrap();
        assert!(d.iter().all(|&i| i == 0));
        let d = systematic_resample(&[0.0, 0.0, 1.0], 7, 0.99).unwrap();
        assert!(d.iter().all(|&i| i == 2));
        assert!(systematic_resample(&[0.0, 0.0], 4, 0.5).is_err());
        for u0 in [0.0, 0.2, 0.5, 0.999] {
            let d = systematic_resample(&[0.25; 7], 10, u0).unwrap();
            assert_eq!(d.len(), 10);
            for k in 0..7 {
                let c = d.iter().filter(|&&i| i == k).count() as f64;
                assert!((c - 10.0 / 7.0).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn start_inside_roi_terminates_immediately() {
        let bev = corridor(3.0, 10.0);
        let cfg = ExplorationConfig {
            n_particles: 20,
            ..Default::default()
        };
        let h = explore(&bev, &Pose::planar(0.0, 0.0, 0.0, 0.0), &square_roi(0.0, 5.0), &cfg, 3.0).unwrap();
        assert_eq!(h.steps.len(), 1);
        assert_eq!(h.terminals.len(), 20);
    }

    #[test]
    fn corridor_exploration_reaches_roi() {
        let bev = corridor(3.0, 60.0);
        let cfg = ExplorationConfig {
            rng_seed: 7,
            ..Default::default()
        };
        let roi = square_roi(60.0, 5.0);
        let h = explore(&bev, &Pose::planar(0.0, 0.0, 0.0, 0.0), &roi, &cfg, 3.0).unwrap();
        assert!(h.terminals.len() as f64 >= 0.95 * 500.0, "{}", h.terminals.len());
        let ys: Vec<f64> = h.terminal_particles().iter().map(|p| p.y).collect();
        let spread = ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 3.0);
        // Population conservation and confinement.
        let mut arrived = 0;
        for rec in &h.steps {
            assert_eq!(rec.particles.len() + arrived, 500);
            arrived += rec.status.iter().filter(|s| **s == ParticleStatus::Arrived).count();
            for (w, s) in rec.weights.iter().zip(&rec.status) {
                assert!((0.0..=1.0).contains(w));
                if *s == ParticleStatus::Alive {
                    assert!(*w > 0.0);
                }
            }
        }
        let again = explore(&bev, &Pose::planar(0.0, 0.0, 0.0, 0.0), &roi, &cfg, 3.0).unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn walled_in_start_goes_extinct() {
        let mut bev = BevMap::new(GridSpec::default());
        for ix in -100..100 {
            for iy in -100..100 {
                bev.set_cell(ix, iy, SemanticClass::Curb);
            }
        }
        let cfg = ExplorationConfig {
            n_particles: 10,
            ..Default::default()
        };
        let e = explore(&bev, &Pose::planar(0.0, 0.0, 0.0, 0.0), &square_roi(50.0, 5.0), &cfg, 3.0).unwrap_err();
        assert_eq!(e.step, 1);
        assert_eq!(e.history.steps.len(), 2);
    }
}
