//! Continuous piecewise-linear regression with free breakpoints.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `f(s) = intercept + slope*s + Σ hinge[i] * max(0, s - breakpoints[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFit {
    pub breakpoints: Vec<f64>,
    pub intercept: f64,
    pub slope: f64,
    pub hinge: Vec<f64>,
    pub loss: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl PiecewiseFit {
    pub fn eval(&self, s: f64) -> f64 {
        self.intercept
            + self.slope * s
            + self
                .breakpoints
                .iter()
                .zip(&self.hinge)
                .map(|(b, c)| c * (s - b).max(0.0))
                .sum::<f64>()
    }
}

/// Least-squares loss and coefficients for fixed breakpoints.
pub fn solve_fixed(points: &[(f64, f64)], breaks: &[f64]) -> (f64, Vec<f64>) {
    let p = breaks.len() + 2;
    let mut ata = DMatrix::<f64>::zeros(p, p);
    let mut atb = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for &(s, d) in points {
        row[0] = 1.0;
        row[1] = s;
        for (k, b) in breaks.iter().enumerate() {
            row[k + 2] = (s - b).max(0.0);
        }
        for i in 0..p {
            atb[i] += row[i] * d;
            for j in i..p {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            ata[(i, j)] = ata[(j, i)];
        }
    }
    let coef = match ata.clone().cholesky() {
        Some(ch) => ch.solve(&atb),
        None => ata
            .svd(true, true)
            .solve(&atb, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(p)),
    };
    let coef: Vec<f64> = coef.iter().copied().collect();
    let loss = points
        .iter()
        .map(|&(s, d)| {
            let f = coef[0]
                + coef[1] * s
                + breaks
                    .iter()
                    .enumerate()
                    .map(|(k, b)| coef[k + 2] * (s - b).max(0.0))
                    .sum::<f64>();
            (d - f) * (d - f)
        })
        .sum();
    (loss, coef)
}

const GRID_CANDIDATES: usize = 60;

/// Fits `n_breaks` interior breakpoints: greedy placement over s-quantiles,
/// then coordinate descent with step halving.
pub fn fit_piecewise(points: &[(f64, f64)], n_breaks: usize) -> Result<PiecewiseFit> {
    if points.len() < 2 * (n_breaks + 1) {
        return Err(Error::UnderDetermined {
            points: points.len(),
            breaks: n_breaks,
        });
    }
    let mut sorted: Vec<f64> = points.iter().map(|p| p.0).collect();
    sorted.sort_by(f64::total_cmp);
    let (s_min, s_max) = (sorted[0], sorted[sorted.len() - 1]);
    let span = s_max - s_min;
    if !(span > 0.0) {
        return Err(Error::Degenerate("regression points have zero s-span".into()));
    }
    // Pieces shorter than one grid cell fit a handful of points: a spike
    // between breaks, a tilted tangent at the ends.
    let sep = span / GRID_CANDIDATES as f64;
    let quantiles: Vec<f64> = (1..GRID_CANDIDATES)
        .map(|i| sorted[(i * (sorted.len() - 1)) / GRID_CANDIDATES])
        .filter(|&q| q >= s_min + sep && q <= s_max - sep)
        .collect();

    let mut breaks: Vec<f64> = Vec::new();
    for _ in 0..n_breaks {
        let mut best: Option<(f64, f64)> = None;
        for &q in &quantiles {
            if breaks.iter().any(|b| (b - q).abs() < sep) {
                continue;
            }
            let mut trial = breaks.clone();
            trial.push(q);
            trial.sort_by(f64::total_cmp);
            let (loss, _) = solve_fixed(points, &trial);
            if best.is_none_or(|(l, _)| loss < l) {
                best = Some((loss, q));
            }
        }
        let q = match best {
            Some((_, q)) => q,
            // Too few distinct positions: spread evenly instead.
            None => s_min + span * (breaks.len() + 1) as f64 / (n_breaks + 1) as f64,
        };
        breaks.push(q);
        breaks.sort_by(f64::total_cmp);
    }

    let (mut loss, _) = solve_fixed(points, &breaks);
    let mut step = span / GRID_CANDIDATES as f64;
    while step > span * 1e-7 && !breaks.is_empty() {
        let mut improved = false;
        for k in 0..breaks.len() {
            let lo = if k == 0 { s_min } else { breaks[k - 1] } + sep;
            let hi = if k + 1 == breaks.len() { s_max } else { breaks[k + 1] } - sep;
            for dir in [-1.0, 1.0] {
                let cand = breaks[k] + dir * step;
                if cand < lo || cand > hi {
                    continue;
                }
                let mut trial = breaks.clone();
                trial[k] = cand;
                let (l, _) = solve_fixed(points, &trial);
                if l < loss {
                    breaks = trial;
                    loss = l;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let (loss, coef) = solve_fixed(points, &breaks);
    Ok(PiecewiseFit {
        breakpoints: breaks,
        intercept: coef[0],
        slope: coef[1],
        hinge: coef[2..].to_vec(),
        loss,
        s_min,
        s_max,
    })
}

/// Smallest drop in mean squared residual (m) that justifies a breakpoint.
pub const BREAK_TOLERANCE: f64 = 0.05;

/// Penalized model selection over `0..=max_breaks`. `lambda` defaults to
/// `n * BREAK_TOLERANCE^2`: ancestry points are strongly correlated, so a
/// penalty on the scale of one residual would admit breaks for every ripple.
pub fn fit_piecewise_auto(points: &[(f64, f64)], max_breaks: usize, lambda: Option<f64>) -> Result<PiecewiseFit> {
    let base = fit_piecewise(points, 0)?;
    let lambda = lambda.unwrap_or(points.len() as f64 * BREAK_TOLERANCE * BREAK_TOLERANCE);
    let mut best = base;
    let mut best_score = best.loss;
    for n in 1..=max_breaks {
        if points.len() < 2 * (n + 1) {
            break;
        }
        let fit = fit_piecewise(points, n)?;
        let score = fit.loss + lambda * n as f64;
        if score < best_score * (1.0 - 1e-9) - 1e-12 {
            best_score = score;
            best = fit;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn v_shape(noise: f64, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise).unwrap();
        (0..=200)
            .map(|i| {
                let s = i as f64 * 0.5;
                (s, (s - 50.0).abs() * 0.1 + normal.sample(&mut rng))
            })
            .collect()
    }

    fn grid_oracle(points: &[(f64, f64)]) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let mut b = 0.1;
        while b < 100.0 - 1e-9 {
            let (l, _) = solve_fixed(points, &[b]);
            if l < best.0 {
                best = (l, b);
            }
            b += 0.1;
        }
        best
    }

    #[test]
    fn collinear_points_fit_exactly() {
        let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 0.3 * i as f64 - 2.0)).collect();
        let fit = fit_piecewise(&pts, 1).unwrap();
        assert!(fit.loss < 1e-12);
        assert!(fit.hinge[0].abs() < 1e-9);
    }

    #[test]
    fn v_shape_corner_recovered() {
        let pts = v_shape(0.0, 0);
        let fit = fit_piecewise(&pts, 1).unwrap();
        assert!((fit.breakpoints[0] - 50.0).abs() < 0.5, "{:?}", fit.breakpoints);
        let (oracle, _) = grid_oracle(&pts);
        assert!(fit.loss <= oracle * 1.001 + 1e-12);
    }

    #[test]
    fn noisy_v_shape_beats_grid_oracle() {
        let pts = v_shape(0.05, 9);
        let fit = fit_piecewise(&pts, 1).unwrap();
        let (oracle, _) = grid_oracle(&pts);
        assert!(fit.loss <= oracle * 1.001, "{} vs {}", fit.loss, oracle);
    }

    #[test]
    fn too_few_points_is_under_determined() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)];
        assert!(matches!(fit_piecewise(&pts, 1), Err(Error::UnderDetermined { .. })));
    }

    #[test]
    fn auto_selection_picks_corner_count() {
        let pts: Vec<(f64, f64)> = v_shape(0.02, 4);
        let fit = fit_piecewise_auto(&pts, 6, None).unwrap();
        assert!(!fit.breakpoints.is_empty());
        let straight: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 1.0)).collect();
        let fit = fit_piecewise_auto(&straight, 6, None).unwrap();
        assert!(fit.breakpoints.is_empty());
    }
}
