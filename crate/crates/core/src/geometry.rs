//! Planar geometry shared by every stage: points, polylines and polygons in
//! the local East-North frame (meters).

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2 { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Point2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Absolute difference of two headings, in [0, pi].
pub fn heading_difference(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

pub fn polyline_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Closest point on a polyline to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineProjection {
    pub distance: f64,
    /// Arclength from the polyline start to the foot point.
    pub offset: f64,
    pub foot: Point2,
    /// Unit direction of the segment holding the foot point.
    pub direction: Point2,
    pub segment: usize,
}

pub fn project_onto_segment(p: Point2, a: Point2, b: Point2) -> (f64, Point2) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (0.0, a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (t, a + ab * t)
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (_, foot) = project_onto_segment(p, a, b);
    p.distance(foot)
}

pub fn project_onto_polyline(p: Point2, line: &[Point2]) -> Option<PolylineProjection> {
    match line.len() {
        0 => None,
        1 => Some(PolylineProjection {
            distance: p.distance(line[0]),
            offset: 0.0,
            foot: line[0],
            direction: Point2::new(1.0, 0.0),
            segment: 0,
        }),
        _ => {
            let mut best: Option<PolylineProjection> = None;
            let mut walked = 0.0;
            for (i, w) in line.windows(2).enumerate() {
                let seg_len = w[0].distance(w[1]);
                let (t, foot) = project_onto_segment(p, w[0], w[1]);
                let d = p.distance(foot);
                if best.is_none_or(|b| d < b.distance) {
                    best = Some(PolylineProjection {
                        distance: d,
                        offset: walked + t * seg_len,
                        foot,
                        direction: (w[1] - w[0]).normalized(),
                        segment: i,
                    });
                }
                walked += seg_len;
            }
            best
        }
    }
}

pub fn distance_to_polyline(p: Point2, line: &[Point2]) -> f64 {
    project_onto_polyline(p, line).map_or(f64::INFINITY, |pr| pr.distance)
}

/// Point at a given arclength along a polyline (clamped to its ends).
pub fn point_at_offset(line: &[Point2], offset: f64) -> Point2 {
    let mut remaining = offset.max(0.0);
    for w in line.windows(2) {
        let seg = w[0].distance(w[1]);
        if remaining <= seg && seg > 0.0 {
            return w[0].lerp(w[1], remaining / seg);
        }
        remaining -= seg;
    }
    *line.last().expect("non-empty polyline")
}

/// Shoelace signed area; positive for counter-clockwise rings.
pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * acc
}

/// Point-in-polygon by ray crossing; points on the boundary count as inside.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if point_segment_distance(p, poly[i], poly[(i + 1) % n]) <= 1e-9 {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Strict interior test (boundary excluded).
pub fn point_strictly_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    (0..n).all(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n]) > 1e-9)
        && point_in_polygon(p, poly)
}

fn orientation(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Proper or touching intersection of two closed segments.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orientation(c, d, a);
    let d2 = orientation(c, d, b);
    let d3 = orientation(a, b, c);
    let d4 = orientation(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2| {
        orientation(p, q, r) == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

/// True when no two non-adjacent edges of the ring intersect.
pub fn polygon_is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Resamples a polyline at a fixed arclength spacing, keeping both ends.
pub fn resample_polyline(line: &[Point2], spacing: f64) -> Vec<Point2> {
    if line.len() < 2 || spacing <= 0.0 {
        return line.to_vec();
    }
    let total = polyline_length(line);
    let n = (total / spacing).floor() as usize;
    let mut out: Vec<Point2> = (0..=n).map(|i| point_at_offset(line, i as f64 * spacing)).collect();
    if total - n as f64 * spacing > 1e-9 {
        out.push(*line.last().unwrap());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(0.5 - 4.0 * PI) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn polyline_projection_offset() {
        let line = [Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0)];
        let pr = project_onto_polyline(Point2::new(11.0, 4.0), &line).unwrap();
        assert!((pr.distance - 1.0).abs() < 1e-12);
        assert!((pr.offset - 14.0).abs() < 1e-12);
        assert_eq!(pr.segment, 1);
    }

    #[test]
    fn point_in_polygon_boundary_counts() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(point_in_polygon(Point2::new(0.5, 0.5), &sq));
        assert!(point_in_polygon(Point2::new(1.0, 0.5), &sq));
        assert!(!point_strictly_in_polygon(Point2::new(1.0, 0.5), &sq));
        assert!(!point_in_polygon(Point2::new(1.5, 0.5), &sq));
        assert!((signed_area(&sq) - 1.0).abs() < 1e-12);
        assert!(polygon_is_simple(&sq));
        let bowtie = [sq[0], sq[2], sq[1], sq[3]];
        assert!(!polygon_is_simple(&bowtie));
    }

    #[test]
    fn resample_keeps_ends() {
        let line = [Point2::new(0.0, 0.0), Point2::new(2.5, 0.0)];
        let r = resample_polyline(&line, 1.0);
        assert_eq!(r.len(), 4);
        assert_eq!(r[3], Point2::new(2.5, 0.0));
    }
}
