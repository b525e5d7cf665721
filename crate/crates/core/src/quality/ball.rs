//! Minimum enclosing ball by randomized incremental construction.

use rand::seq::SliceRandom;

use crate::mesh::geom::{add, cross, dist, dot, norm2, scale, sub, Point3};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Point3,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: Point3, slack: f64) -> bool {
        dist(self.center, p) <= self.radius + slack
    }
}

fn ball2(a: Point3, b: Point3) -> Ball {
    let center = scale(add(a, b), 0.5);
    Ball { center, radius: dist(center, a) }
}

/// Smallest ball with `a`, `b`, `c` on its boundary; `None` for collinear input.
fn ball3(a: Point3, b: Point3, c: Point3) -> Option<Ball> {
    let u = sub(b, a);
    let v = sub(c, a);
    let w = cross(u, v);
    let ww = norm2(w);
    if ww <= 1e-24 * norm2(u) * norm2(v) || ww == 0.0 {
        return None;
    }
    let num = cross(sub(scale(v, norm2(u)), scale(u, norm2(v))), w);
    let center = add(a, scale(num, 0.5 / ww));
    Some(Ball { center, radius: dist(center, a) })
}

/// Ball through four points; `None` for coplanar input.
fn ball4(a: Point3, b: Point3, c: Point3, d: Point3) -> Option<Ball> {
    let r = [sub(b, a), sub(c, a), sub(d, a)];
    let rhs = r.map(|x| 0.5 * norm2(x));
    let det = dot(r[0], cross(r[1], r[2]));
    let scale3 = (norm2(r[0]) * norm2(r[1]) * norm2(r[2])).sqrt();
    if det.abs() <= 1e-12 * scale3 || det == 0.0 {
        return None;
    }
    let x = add(
        add(scale(cross(r[1], r[2]), rhs[0]), scale(cross(r[2], r[0]), rhs[1])),
        scale(cross(r[0], r[1]), rhs[2]),
    );
    let center = add(a, scale(x, 1.0 / det));
    Some(Ball { center, radius: dist(center, a) })
}

fn smallest_containing(cands: impl IntoIterator<Item = Ball>, pts: &[Point3], slack: f64) -> Ball {
    cands
        .into_iter()
        .filter(|b| pts.iter().all(|&p| b.contains(p, slack)))
        .min_by(|a, b| a.radius.total_cmp(&b.radius))
        .expect("the diametral ball of the farthest pair is a candidate")
}

fn with_boundary3(a: Point3, b: Point3, c: Point3, slack: f64) -> Ball {
    ball3(a, b, c).unwrap_or_else(|| {
        smallest_containing([ball2(a, b), ball2(a, c), ball2(b, c)], &[a, b, c], slack)
    })
}

fn with_boundary4(a: Point3, b: Point3, c: Point3, d: Point3, slack: f64) -> Ball {
    ball4(a, b, c, d).unwrap_or_else(|| {
        let pts = [a, b, c, d];
        let mut cands = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                cands.push(ball2(pts[i], pts[j]));
                for k in j + 1..4 {
                    cands.extend(ball3(pts[i], pts[j], pts[k]));
                }
            }
        }
        smallest_containing(cands, &pts, slack)
    })
}

/// Exact minimum enclosing ball of `points` (non-empty).
pub fn min_enclosing_ball(points: &[Point3], seed: u64) -> Ball {
    assert!(!points.is_empty(), "minimum enclosing ball of no points");
    let mut p = points.to_vec();
    p.shuffle(&mut seed::rng(seed));
    let extent = p.iter().fold(0.0f64, |m, q| m.max(q.iter().fold(0.0f64, |a, v| a.max(v.abs()))));
    let slack = 1e-12 * (1.0 + extent);
    let mut b = Ball { center: p[0], radius: 0.0 };
    for i in 1..p.len() {
        if b.contains(p[i], slack) {
            continue;
        }
        b = Ball { center: p[i], radius: 0.0 };
        for j in 0..i {
            if b.contains(p[j], slack) {
                continue;
            }
            b = ball2(p[i], p[j]);
            for k in 0..j {
                if b.contains(p[k], slack) {
                    continue;
                }
                b = with_boundary3(p[i], p[j], p[k], slack);
                for l in 0..k {
                    if b.contains(p[l], slack) {
                        continue;
                    }
                    b = with_boundary4(p[i], p[j], p[k], p[l], slack);
                }
            }
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn exhaustive(pts: &[Point3]) -> f64 {
        let n = pts.len();
        let mut cands = vec![Ball { center: pts[0], radius: 0.0 }];
        for i in 0..n {
            for j in i + 1..n {
                cands.push(ball2(pts[i], pts[j]));
                for k in j + 1..n {
                    cands.extend(ball3(pts[i], pts[j], pts[k]));
                    for l in k + 1..n {
                        cands.extend(ball4(pts[i], pts[j], pts[k], pts[l]));
                    }
                }
            }
        }
        cands
            .into_iter()
            .filter(|b| pts.iter().all(|&p| b.contains(p, 1e-9)))
            .map(|b| b.radius)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = seed::rng(11);
        for trial in 0..60 {
            let n = rng.random_range(1..=12);
            let pts: Vec<Point3> = (0..n).map(|_| [rng.random(), rng.random(), rng.random::<f64>() * 2.0]).collect();
            let b = min_enclosing_ball(&pts, trial);
            assert!(pts.iter().all(|&p| b.contains(p, 1e-9)));
            let opt = exhaustive(&pts);
            assert!((b.radius - opt).abs() <= 1e-9, "trial {trial}: {} vs {opt}", b.radius);
        }
    }

    #[test]
    fn cube_corners() {
        let pts: Vec<Point3> = (0..8).map(|i| [(i & 1) as f64, (i >> 1 & 1) as f64, (i >> 2 & 1) as f64]).collect();
        let b = min_enclosing_ball(&pts, 0);
        assert!((b.radius - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn coplanar_and_collinear() {
        let line: Vec<Point3> = (0..5).map(|i| [i as f64, 0.0, 0.0]).collect();
        assert!((min_enclosing_ball(&line, 1).radius - 2.0).abs() < 1e-12);
        let square = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.5, 0.5, 0.0]];
        assert!((min_enclosing_ball(&square, 2).radius - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
