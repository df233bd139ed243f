//! Density-based clustering with a uniform-grid neighbor index.

use std::collections::HashMap;

use crate::geometry::Point2;

/// Cluster id per point; `None` marks noise. Points are scanned in index
/// order, so border points go to the first cluster that reaches them.
pub fn dbscan(points: &[Point2], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    if n == 0 || !(eps > 0.0) {
        return labels;
    }
    let key = |p: Point2| ((p.x / eps).floor() as i64, (p.y / eps).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(*p)).or_default().push(i);
    }
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let (kx, ky) = key(points[i]);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(kx + dx, ky + dy)) {
                    for &j in bucket {
                        let d = points[j] - points[i];
                        if d.dot(d) <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out
    };

    let mut visited = vec![false; n];
    let mut next_id = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = neighbors(i);
        if nb.len() < min_pts {
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[i] = Some(id);
        let mut queue = nb;
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            if labels[j].is_none() {
                labels[j] = Some(id);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nbj = neighbors(j);
            if nbj.len() >= min_pts {
                queue.extend(nbj);
            }
        }
    }
    labels
}

pub fn cluster_count(labels: &[Option<usize>]) -> usize {
    labels.iter().flatten().max().map_or(0, |m| m + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook O(n^2) DBSCAN.
    fn reference(points: &[Point2], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
        let n = points.len();
        let region = |i: usize| -> Vec<usize> {
            (0..n).filter(|&j| points[i].distance(points[j]) <= eps).collect()
        };
        let mut label: Vec<i64> = vec![-2; n]; // -2 undefined, -1 noise
        let mut c = -1i64;
        for i in 0..n {
            if label[i] != -2 {
                continue;
            }
            let nb = region(i);
            if nb.len() < min_pts {
                label[i] = -1;
                continue;
            }
            c += 1;
            label[i] = c;
            let mut seeds: Vec<usize> = nb.into_iter().filter(|&j| j != i).collect();
            let mut k = 0;
            while k < seeds.len() {
                let q = seeds[k];
                k += 1;
                if label[q] == -1 {
                    label[q] = c;
                }
                if label[q] != -2 {
                    continue;
                }
                label[q] = c;
                let nq = region(q);
                if nq.len() >= min_pts {
                    seeds.extend(nq);
                }
            }
        }
        label.into_iter().map(|l| (l >= 0).then_some(l as usize)).collect()
    }

    #[test]
    fn separated_groups() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(Point2::new(0.1 * i as f64, 0.0));
            pts.push(Point2::new(5.0 + 0.1 * i as f64, 0.0));
        }
        let l = dbscan(&pts, 1.0, 3);
        assert_eq!(cluster_count(&l), 2);
        assert!(l.iter().all(|x| x.is_some()));
        assert_eq!(dbscan(&[Point2::new(0.0, 0.0)], 1.0, 3), vec![None]);
        assert!(dbscan(&[], 1.0, 3).is_empty());
    }

    #[test]
    fn matches_brute_force_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(1..=200);
            let pts: Vec<Point2> = (0..n)
                .map(|_| Point2::new(rng.gen_range(0.0..12.0), rng.gen_range(0.0..12.0)))
                .collect();
            assert_eq!(dbscan(&pts, 1.0, 4), reference(&pts, 1.0, 4));
        }
    }
}
