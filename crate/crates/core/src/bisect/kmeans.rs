use rand::Rng;

use super::{check_rows, BisectionLabels, BisectionModel};
use crate::features::FeatureMatrix;
use crate::graph::DualGraph;
use crate::mesh::geom::{dist2, Point3};
use crate::seed;
use crate::{Error, Result};

/// k-means (k = 2) on raw centroids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KMeansBisector {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansBisector {
    fn default() -> Self {
        KMeansBisector {
            restarts: 8,
            max_iter: 100,
        }
    }
}

impl BisectionModel for KMeansBisector {
    fn name(&self) -> &str {
        "kmeans"
    }

    fn bisect(&self, graph: &DualGraph, x: &FeatureMatrix, seed: u64) -> Result<BisectionLabels> {
        check_rows(graph, x)?;
        if x.rows() <= 1 {
            return BisectionLabels::new(vec![0; x.rows()]);
        }
        let r = kmeans2(&x.all_coords(), seed, self.restarts, self.max_iter)?;
        BisectionLabels::new(r.labels)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<u8>,
    pub centers: [Point3; 2],
    /// Sum of squared distances to the assigned center.
    pub sse: f64,
}

/// Default k-means bisection of the centroid columns of `x`.
pub fn kmeans_bisect(x: &FeatureMatrix, seed: u64) -> Result<BisectionLabels> {
    let km = KMeansBisector::default();
    BisectionLabels::new(kmeans2(&x.all_coords(), seed, km.restarts, km.max_iter)?.labels)
}

/// Best of `restarts` seeded Lloyd runs with k-means++ starts.
pub fn kmeans2(points: &[Point3], seed: u64, restarts: usize, max_iter: usize) -> Result<KMeansResult> {
    if points.len() < 2 {
        return Err(Error::Contract(format!("k-means needs at least 2 points, got {}", points.len())));
    }
    if points.iter().all(|p| *p == points[0]) {
        return Err(Error::DegenerateGeometry("all points coincide".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let run = lloyd(points, seed::derive(seed, [r as u64]), max_iter);
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn nearest(p: Point3, centers: &[Point3; 2]) -> u8 {
    u8::from(dist2(p, centers[1]) < dist2(p, centers[0]))
}

fn lloyd(points: &[Point3], seed: u64, max_iter: usize) -> KMeansResult {
    let mut rng = seed::rng(seed);
    let n = points.len();
    let first = points[rng.random_range(0..n)];
    let d2: Vec<f64> = points.iter().map(|&p| dist2(p, first)).collect();
    let total: f64 = d2.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut second = *points.iter().zip(&d2).rev().find(|(_, &d)| d > 0.0).expect("points differ").0;
    for (p, &d) in points.iter().zip(&d2) {
        if d > 0.0 && target < d {
            second = *p;
            break;
        }
        target -= d;
    }
    let mut centers = [first, second];
    let mut labels: Vec<u8> = points.iter().map(|&p| nearest(p, &centers)).collect();
    for _ in 0..max_iter {
        centers = update_centers(points, &mut labels, &centers);
        let next: Vec<u8> = points.iter().map(|&p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    // Labels are nearest-center with respect to the returned centers.
    let labels: Vec<u8> = points.iter().map(|&p| nearest(p, &centers)).collect();
    let sse = points.iter().zip(&labels).map(|(&p, &l)| dist2(p, centers[l as usize])).sum();
    KMeansResult { labels, centers, sse }
}

/// Cluster means; an empty cluster takes the point farthest from its center.
fn update_centers(points: &[Point3], labels: &mut [u8], old: &[Point3; 2]) -> [Point3; 2] {
    for k in 0..2u8 {
        if !labels.contains(&k) {
            let far = (0..points.len())
                .max_by(|&a, &b| {
                    let da = dist2(points[a], old[labels[a] as usize]);
                    let db = dist2(points[b], old[labels[b] as usize]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("non-empty");
            labels[far] = k;
        }
    }
    let mut sum = [[0.0; 3]; 2];
    let mut cnt = [0usize; 2];
    for (p, &l) in points.iter().zip(labels.iter()) {
        for c in 0..3 {
            sum[l as usize][c] += p[c];
        }
        cnt[l as usize] += 1;
    }
    let mut centers = *old;
    for k in 0..2 {
        if cnt[k] > 0 {
            centers[k] = [0, 1, 2].map(|c| sum[k][c] / cnt[k] as f64);
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sse_of(points: &[Point3], mask: u32) -> f64 {
        let mut total = 0.0;
        for side in [0, 1] {
            let pts: Vec<Point3> =
                (0..points.len()).filter(|&i| (mask >> i & 1) == side).map(|i| points[i]).collect();
            let c = [0, 1, 2].map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64);
            total += pts.iter().map(|&p| dist2(p, c)).sum::<f64>();
        }
        total
    }

    #[test]
    fn separated_blobs() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push([i as f64 * 0.01, 0.0, 0.0]);
            pts.push([10.0 + i as f64 * 0.01, 0.0, 0.0]);
        }
        let r = kmeans2(&pts, 1, 4, 100).unwrap();
        for i in 0..5 {
            assert_ne!(r.labels[2 * i], r.labels[2 * i + 1]);
            assert_eq!(r.labels[2 * i], r.labels[0]);
        }
    }

    #[test]
    fn symmetric_pair_and_degenerate() {
        let r = kmeans2(&[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], 0, 1, 100).unwrap();
        assert_ne!(r.labels[0], r.labels[1]);
        assert!(matches!(kmeans2(&[[1.0; 3]; 4], 0, 4, 100), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn near_exhaustive_optimum() {
        for trial in 0..20u64 {
            let mut rng = seed::rng(trial);
            let pts: Vec<Point3> = (0..12).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
            let opt = (1..(1u32 << 12) - 1).map(|m| sse_of(&pts, m)).fold(f64::INFINITY, f64::min);
            let r = kmeans2(&pts, trial, KMeansBisector::default().restarts, 100).unwrap();
            assert!(r.sse <= 1.05 * opt, "trial {trial}: {} vs {opt}", r.sse);
        }
    }

    #[test]
    fn lloyd_fixed_point() {
        let mut rng = seed::rng(99);
        let pts: Vec<Point3> = (0..200).map(|_| [rng.random(), rng.random::<f64>() * 3.0, rng.random()]).collect();
        let r = kmeans2(&pts, 5, 4, 100).unwrap();
        for (p, &l) in pts.iter().zip(&r.labels) {
            assert!(dist2(*p, r.centers[l as usize]) <= dist2(*p, r.centers[1 - l as usize]));
        }
    }
}
