//! Small fixed-size vector geometry on `[f64; 3]`.

pub type Point3 = [f64; 3];

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm2(a: Point3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Point3) -> f64 {
    norm2(a).sqrt()
}

#[inline]
pub fn dist2(a: Point3, b: Point3) -> f64 {
    norm2(sub(a, b))
}

#[inline]
pub fn dist(a: Point3, b: Point3) -> f64 {
    dist2(a, b).sqrt()
}

/// Six times the signed volume of the tetrahedron `abcd`.
#[inline]
pub fn det6(a: Point3, b: Point3, c: Point3, d: Point3) -> f64 {
    dot(sub(b, a), cross(sub(c, a), sub(d, a)))
}

pub fn tet_volume(p: &[Point3; 4]) -> f64 {
    det6(p[0], p[1], p[2], p[3]).abs() / 6.0
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let n = points.len() as f64;
    let s = points.iter().fold([0.0; 3], |acc, &p| add(acc, p));
    scale(s, 1.0 / n)
}

fn triangle_area(a: Point3, b: Point3, c: Point3) -> f64 {
    0.5 * norm(cross(sub(b, a), sub(c, a)))
}

/// Center of the inscribed sphere: vertices weighted by opposite face areas.
pub fn tet_incenter(p: &[Point3; 4]) -> Point3 {
    let w = [
        triangle_area(p[1], p[2], p[3]),
        triangle_area(p[0], p[2], p[3]),
        triangle_area(p[0], p[1], p[3]),
        triangle_area(p[0], p[1], p[2]),
    ];
    let total: f64 = w.iter().sum();
    let mut c = [0.0; 3];
    for (wi, pi) in w.iter().zip(p) {
        c = add(c, scale(*pi, *wi));
    }
    scale(c, 1.0 / total)
}

/// Whether `q` lies in the closed tetrahedron, with relative slack `tol`.
pub fn point_in_tet(q: Point3, p: &[Point3; 4], tol: f64) -> bool {
    let total = det6(p[0], p[1], p[2], p[3]);
    if total == 0.0 {
        return false;
    }
    let b = [
        det6(q, p[1], p[2], p[3]),
        det6(p[0], q, p[2], p[3]),
        det6(p[0], p[1], q, p[3]),
        det6(p[0], p[1], p[2], q),
    ];
    b.iter().all(|bi| bi / total >= -tol)
}

/// Euclidean distance from `p` to the closed triangle `abc`.
pub fn point_triangle_distance(p: Point3, a: Point3, b: Point3, c: Point3) -> f64 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return norm(ap);
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return norm(bp);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return dist(p, add(a, scale(ab, v)));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return norm(cp);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return dist(p, add(a, scale(ac, w)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return dist(p, add(b, scale(sub(c, b), w)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    dist(p, add(a, add(scale(ab, v), scale(ac, w))))
}

/// Exact diameter (largest pairwise distance) of a point set.
///
/// All pairs are scanned, ordered by distance from the bounding-box center so
/// that pairs whose triangle-inequality bound cannot beat the current best are
/// skipped.
pub fn diameter(points: &[Point3]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let center = scale(add(lo, hi), 0.5);
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| (dist(p, center), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    // Lower bound from a double farthest-point sweep.
    let far = |from: Point3| {
        points
            .iter()
            .copied()
            .map(|q| dist2(from, q))
            .fold(0.0f64, f64::max)
    };
    let first = order[0].1;
    let mut best2 = far(points[first]);
    let mut best = best2.sqrt();

    for a in 0..order.len() {
        let (ra, ia) = order[a];
        if a + 1 < order.len() && ra + order[a + 1].0 <= best {
            break;
        }
        for &(rb, ib) in &order[a + 1..] {
            if ra + rb <= best {
                break;
            }
            let d2 = dist2(points[ia], points[ib]);
            if d2 > best2 {
                best2 = d2;
                best = d2.sqrt();
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn incenter_of_corner_tet() {
        let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        // r = 3V / A = 0.5 / (1.5 + sqrt(3)/2)
        let r = 0.5 / (1.5 + 3f64.sqrt() / 2.0);
        let c = tet_incenter(&p);
        for k in 0..3 {
            assert!((c[k] - r).abs() < 1e-14);
        }
    }

    #[test]
    fn triangle_distance_regions() {
        let a = [0.0, 0.0, 0.0];
        let b = [1.0, 0.0, 0.0];
        let c = [0.0, 1.0, 0.0];
        assert!((point_triangle_distance([0.2, 0.2, 2.0], a, b, c) - 2.0).abs() < 1e-15);
        assert!((point_triangle_distance([-1.0, -1.0, 0.0], a, b, c) - 2f64.sqrt()).abs() < 1e-15);
        assert!((point_triangle_distance([0.5, -1.0, 0.0], a, b, c) - 1.0).abs() < 1e-15);
        assert!((point_triangle_distance([1.0, 1.0, 0.0], a, b, c) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pruned_diameter_matches_all_pairs() {
        let mut rng = crate::seed::rng(5);
        for n in [2usize, 3, 17, 200] {
            let pts: Vec<Point3> = (0..n)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>() * 3.0, rng.random::<f64>()])
                .collect();
            let mut brute = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    brute = brute.max(dist(pts[i], pts[j]));
                }
            }
            assert_eq!(diameter(&pts), brute);
        }
    }
}
