//! Natural cubic spline interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interpolant through `(knots[i], values[i])` stored by its knot second
/// derivatives; `second[0] = second[n-1] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalSpline {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub second: Vec<f64>,
}

/// Cubic on one interval: `a + b*u + c*u^2 + d*u^3` with `u = s - knot`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineSegment {
    pub knot: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl NaturalSpline {
    pub fn new(knots: &[f64], values: &[f64]) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::Degenerate(format!(
                "spline needs >= 2 knots with matching values, got {n}/{}",
                values.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Degenerate("spline knots must be strictly increasing".into()));
        }
        let mut second = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas).
            let m = n - 2;
            let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            let mut upper = vec![0.0; m];
            for i in 0..m {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                rhs[i] = 6.0
                    * ((values[i + 2] - values[i + 1]) / h[i + 1] - (values[i + 1] - values[i]) / h[i]);
            }
            for i in 1..m {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut x = vec![0.0; m];
            x[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
            }
            second[1..n - 1].copy_from_slice(&x);
        }
        Ok(NaturalSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
        })
    }

    fn interval(&self, s: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        }
    }

    pub fn segment(&self, i: usize) -> SplineSegment {
        let h = self.knots[i + 1] - self.knots[i];
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        SplineSegment {
            knot: self.knots[i],
            a: y0,
            b: (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0,
            c: m0 / 2.0,
            d: (m1 - m0) / (6.0 * h),
        }
    }

    pub fn segments(&self) -> Vec<SplineSegment> {
        (0..self.knots.len() - 1).map(|i| self.segment(i)).collect()
    }

    /// Value; outside the knot range the end cubic is extrapolated.
    pub fn eval(&self, s: f64) -> f64 {
        let g = self.segment(self.interval(s));
        let u = s - g.knot;
        g.a + u * (g.b + u * (g.c + u * g.d))
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let g = self.segment(self.interval(s));
        let u = s - g.knot;
        g.b + u * (2.0 * g.c + 3.0 * u * g.d)
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        let g = self.segment(self.interval(s));
        2.0 * g.c + 6.0 * g.d * (s - g.knot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_knots_are_linear() {
        let sp = NaturalSpline::new(&[0.0, 4.0], &[1.0, 3.0]).unwrap();
        for s in [0.0, 1.0, 2.5, 4.0] {
            assert!((sp.eval(s) - (1.0 + 0.5 * s)).abs() < 1e-12);
            assert_eq!(sp.second_derivative(s), 0.0);
        }
    }

    #[test]
    fn interpolates_parabola_samples() {
        let k = [0.0, 1.0, 2.5, 3.0, 5.0];
        let v: Vec<f64> = k.iter().map(|x| x * x - 2.0 * x).collect();
        let sp = NaturalSpline::new(&k, &v).unwrap();
        for (x, y) in k.iter().zip(&v) {
            assert!((sp.eval(*x) - y).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_knots_rejected() {
        assert!(NaturalSpline::new(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn continuity_and_natural_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut k = vec![rng.gen_range(-5.0..5.0)];
            for _ in 0..5 {
                k.push(k.last().unwrap() + rng.gen_range(0.2..8.0));
            }
            let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let sp = NaturalSpline::new(&k, &v).unwrap();
            let segs = sp.segments();
            for i in 0..segs.len() - 1 {
                let g = segs[i];
                let u = k[i + 1] - k[i];
                let (f, d1, d2) = (
                    g.a + g.b * u + g.c * u * u + g.d * u * u * u,
                    g.b + 2.0 * g.c * u + 3.0 * g.d * u * u,
                    2.0 * g.c + 6.0 * g.d * u,
                );
                let n = segs[i + 1];
                assert!((f - n.a).abs() < 1e-8);
                assert!((d1 - n.b).abs() < 1e-8);
                assert!((d2 - 2.0 * n.c).abs() < 1e-8);
            }
            assert!(segs[0].c.abs() < 1e-8);
            let last = segs[segs.len() - 1];
            let u = k[5] - k[4];
            assert!((2.0 * last.c + 6.0 * last.d * u).abs() < 1e-8);
        }
    }
}
