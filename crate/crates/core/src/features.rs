//! Node features and the normalization layer applied before the network.
//!
//! Raw features per tet are `(x, y, z, V[, ρ])`: centroid, volume and
//! optionally the region's physical parameter. Normalization aligns the
//! centroid cloud's principal axes with the coordinate axes, then rescales
//! each column; ρ is additionally smoothed over each node's neighborhood.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::DualGraph;
use crate::mesh::geom::{self, Point3};
use crate::mesh::TetMesh;
use crate::nn::Tensor2;
use crate::{Error, Result};

/// Eigenvalue gap below which principal directions are treated as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// Row-major `rows × cols` feature matrix, `cols` = 4 or 5.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols != 4 && cols != 5 {
            return Err(Error::Shape(format!("feature matrix needs 4 or 5 columns, got {cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} feature matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn has_physical(&self) -> bool {
        self.cols == 5
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.data[i * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, c)).collect()
    }

    fn set_column(&mut self, c: usize, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + c] = *v;
        }
    }

    pub fn coords(&self, i: usize) -> Point3 {
        let r = self.row(i);
        [r[0], r[1], r[2]]
    }

    pub fn all_coords(&self) -> Vec<Point3> {
        (0..self.rows).map(|i| self.coords(i)).collect()
    }

    /// Applies `rot` to the coordinate columns.
    pub fn rotated(&self, rot: &Rotation3) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            let p = rot.apply(self.coords(i));
            out.data[i * self.cols..i * self.cols + 3].copy_from_slice(&p);
        }
        out
    }

    /// New matrix made of the listed rows, in order.
    pub fn gather(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Row `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            let dst = perm[i] * self.cols;
            data[dst..dst + self.cols].copy_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn to_tensor(&self) -> Tensor2 {
        Tensor2::from_vec(self.rows, self.cols, self.data.clone())
    }
}

/// Raw features: row `t` = (centroid, volume[, ρ]) of tet `t`.
pub fn build_features(mesh: &TetMesh, with_physical: bool) -> Result<FeatureMatrix> {
    if with_physical && !mesh.has_params() {
        return Err(Error::Config(
            "physical features requested but the mesh carries no region parameters".into(),
        ));
    }
    let cols = if with_physical { 5 } else { 4 };
    let mut data = Vec::with_capacity(mesh.n_tets() * cols);
    for t in 0..mesh.n_tets() {
        let g = mesh.tet_geometry(t);
        data.extend_from_slice(&g.centroid);
        data.push(g.volume);
        if with_physical {
            data.push(mesh.rho_of_tet(t));
        }
    }
    FeatureMatrix::new(mesh.n_tets(), cols, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// Coordinates mapped to [-1, 1] per column.
    Base,
    /// Coordinates standardized to mean 0, variance 1 per column.
    Enhanced,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormOptions {
    pub mode: NormMode,
    /// Whether the ρ neighborhood average includes the node itself.
    pub smooth_include_self: bool,
}

impl NormOptions {
    pub fn new(mode: NormMode) -> Self {
        NormOptions {
            mode,
            smooth_include_self: true,
        }
    }
}

/// `(lo, range)` of `values`, or `None` when the range is zero up to
/// rounding (relative to the largest magnitude).
fn value_range(values: &[f64]) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    (range > 1e-12 * lo.abs().max(hi.abs())).then_some((lo, range))
}

/// Min-max rescale to [0, 1]; a zero-range column maps to all zeros.
pub fn minmax_unit(values: &[f64]) -> Vec<f64> {
    match value_range(values) {
        Some((lo, range)) => values.iter().map(|v| (v - lo) / range).collect(),
        None => vec![0.0; values.len()],
    }
}

/// Affine map onto [-1, 1]; a zero-range column maps to all zeros.
fn minmax_symmetric(values: &[f64]) -> Vec<f64> {
    match value_range(values) {
        Some((lo, range)) => values.iter().map(|v| 2.0 * (v - lo) / range - 1.0).collect(),
        None => vec![0.0; values.len()],
    }
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let sd = var.sqrt();
    if sd <= 1e-12 * scale {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Average of `values` over each node's neighborhood.
pub fn smooth_over_neighbors(values: &[f64], graph: &DualGraph, include_self: bool) -> Vec<f64> {
    (0..graph.n())
        .map(|i| {
            let nb = graph.neighbors(i);
            let s: f64 = nb.iter().map(|&j| values[j]).sum();
            if include_self {
                (s + values[i]) / (nb.len() + 1) as f64
            } else if nb.is_empty() {
                values[i]
            } else {
                s / nb.len() as f64
            }
        })
        .collect()
}

/// The normalization layer.
///
/// Coordinates are centered and rotated onto their principal axes first, then
/// standardized (Enhanced) or mapped to [-1, 1] (Base). Volumes and ρ are
/// min-max rescaled to [0, 1]; ρ is then replaced by its neighborhood mean.
pub fn normalize_features(
    x: &FeatureMatrix,
    graph: &DualGraph,
    opts: NormOptions,
) -> Result<FeatureMatrix> {
    if x.rows() != graph.n() {
        return Err(Error::Shape(format!(
            "{} feature rows for a graph with {} nodes",
            x.rows(),
            graph.n()
        )));
    }
    let n = x.rows();
    let mut out = x.clone();
    if n == 0 {
        return Ok(out);
    }

    let coords = x.all_coords();
    let mean = geom::scale(
        coords.iter().fold([0.0; 3], |a, &p| geom::add(a, p)),
        1.0 / n as f64,
    );
    let rot = principal_axis_rotation(&coords);
    let aligned: Vec<Point3> = coords.iter().map(|&p| rot.apply(geom::sub(p, mean))).collect();
    for c in 0..3 {
        let col: Vec<f64> = aligned.iter().map(|p| p[c]).collect();
        let scaled = match opts.mode {
            NormMode::Enhanced => standardize(&col),
            NormMode::Base => minmax_symmetric(&col),
        };
        out.set_column(c, &scaled);
    }
    out.set_column(3, &minmax_unit(&x.column(3)));
    if x.has_physical() {
        let rho = minmax_unit(&x.column(4));
        out.set_column(4, &smooth_over_neighbors(&rho, graph, opts.smooth_include_self));
    }
    Ok(out)
}

/// Proper rotation matrix (orthonormal, det +1), row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3(pub [[f64; 3]; 3]);

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        let m = &self.0;
        [geom::dot(m[0], p), geom::dot(m[1], p), geom::dot(m[2], p)]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Rotation3(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    pub fn compose(&self, other: &Rotation3) -> Self {
        let (a, b) = (&self.0, &other.0);
        Rotation3(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum())
        }))
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        geom::dot(m[0], geom::cross(m[1], m[2]))
    }

    /// max |RᵀR − I| entry.
    pub fn orthonormality_residual(&self) -> f64 {
        let rtr = self.transpose().compose(self);
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((rtr.0[i][j] - target).abs());
            }
        }
        worst
    }
}

/// Uniformly distributed rotation (unit-quaternion sampling), deterministic in `seed`.
pub fn random_rotation(seed: u64) -> Rotation3 {
    let mut rng = crate::seed::rng(seed);
    random_rotation_with(&mut rng)
}

pub fn random_rotation_with<R: Rng>(rng: &mut R) -> Rotation3 {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (x, y, z, w) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    Rotation3([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

/// Population covariance of a point cloud.
pub fn covariance(points: &[Point3]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let mean = geom::scale(points.iter().fold([0.0; 3], |a, &p| geom::add(a, p)), 1.0 / n);
    let mut c = [[0.0; 3]; 3];
    for p in points {
        let d = geom::sub(*p, mean);
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += d[i] * d[j];
            }
        }
    }
    c.map(|row| row.map(|v| v / n))
}

/// Eigen-decomposition of a symmetric 3×3 matrix: eigenvalues in decreasing
/// order and unit eigenvectors (as rows).
///
/// Eigenvalues come from the trigonometric closed form, eigenvectors from
/// cross products of rows of `A − λI`; a few Jacobi sweeps then polish the
/// basis to full precision.
pub fn sym3_eigen(a: &[[f64; 3]; 3]) -> ([f64; 3], [Point3; 3]) {
    let vals = sym3_eigenvalues(a);
    let mut vecs = [[0.0; 3]; 3];
    let mut have = [false; 3];
    for k in 0..3 {
        if let Some(v) = null_vector(a, vals[k]).and_then(|v| orthogonalize(v, &vecs[..k], &have[..k])) {
            vecs[k] = v;
            have[k] = true;
        }
    }
    let basis = complete_basis(vecs, have);
    polish(a, basis)
}

fn sym3_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let mut vals = if p1 == 0.0 {
        [a[0][0], a[1][1], a[2][2]]
    } else {
        let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b: [[f64; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|j| (a[i][j] - if i == j { q } else { 0.0 }) / p)
        });
        let det_b = geom::dot(b[0], geom::cross(b[1], b[2]));
        let phi = (det_b / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let l1 = q + 2.0 * p * phi.cos();
        let l3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        [l1, 3.0 * q - l1 - l3, l3]
    };
    vals.sort_by(|x, y| y.total_cmp(x));
    vals
}

fn null_vector(a: &[[f64; 3]; 3], lambda: f64) -> Option<Point3> {
    let m: [Point3; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| a[i][j] - if i == j { lambda } else { 0.0 })
    });
    let cands = [geom::cross(m[0], m[1]), geom::cross(m[0], m[2]), geom::cross(m[1], m[2])];
    let best = cands
        .into_iter()
        .max_by(|x, y| geom::norm2(*x).total_cmp(&geom::norm2(*y)))?;
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let len = geom::norm(best);
    (len > 1e-10 * scale * scale).then(|| geom::scale(best, 1.0 / len))
}

fn orthogonalize(v: Point3, basis: &[Point3], have: &[bool]) -> Option<Point3> {
    let mut w = v;
    for (b, h) in basis.iter().zip(have) {
        if *h {
            w = geom::sub(w, geom::scale(*b, geom::dot(w, *b)));
        }
    }
    let len = geom::norm(w);
    (len > 1e-6).then(|| geom::scale(w, 1.0 / len))
}

fn complete_basis(mut vecs: [Point3; 3], mut have: [bool; 3]) -> [Point3; 3] {
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for k in 0..3 {
        if have[k] {
            continue;
        }
        for axis in axes {
            if let Some(v) = orthogonalize(axis, &vecs, &have) {
                vecs[k] = v;
                have[k] = true;
                break;
            }
        }
    }
    vecs
}

/// Cyclic Jacobi on `V A Vᵀ`, accumulating into the rows of `V`.
fn polish(a: &[[f64; 3]; 3], mut v: [Point3; 3]) -> ([f64; 3], [Point3; 3]) {
    let project = |v: &[Point3; 3]| -> [[f64; 3]; 3] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let av: Point3 = std::array::from_fn(|r| geom::dot(a[r], v[j]));
                geom::dot(v[i], av)
            })
        })
    };
    for _ in 0..8 {
        let d = project(&v);
        let off = d[0][1].abs() + d[0][2].abs() + d[1][2].abs();
        let diag = d[0][0].abs() + d[1][1].abs() + d[2][2].abs();
        if off <= 1e-18 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let d = project(&v);
            if d[p][q] == 0.0 {
                continue;
            }
            let theta = (d[q][q] - d[p][p]) / (2.0 * d[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let (vp, vq) = (v[p], v[q]);
            v[p] = geom::sub(geom::scale(vp, c), geom::scale(vq, s));
            v[q] = geom::add(geom::scale(vp, s), geom::scale(vq, c));
        }
    }
    let d = project(&v);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| d[j][j].total_cmp(&d[i][i]));
    (idx.map(|i| d[i][i]), idx.map(|i| v[i]))
}

/// Flips `v` so its component along `axes[0]` is positive; zero components
/// defer to the next axis in `axes`.
fn orient(v: Point3, axes: [usize; 3]) -> Point3 {
    for a in axes {
        if v[a] > 0.0 {
            return v;
        }
        if v[a] < 0.0 {
            return geom::scale(v, -1.0);
        }
    }
    v
}

/// Rotation taking the leading principal direction of the (unweighted)
/// centroid covariance to +x and the second to +y.
///
/// A single point or an isotropic cloud gives the identity. When only two
/// eigenvalues coincide, the unique axis is kept and the free direction in the
/// degenerate plane is taken from the projection of the canonical axis.
pub fn principal_axis_rotation(coords: &[Point3]) -> Rotation3 {
    if coords.len() <= 1 {
        return Rotation3::identity();
    }
    let cov = covariance(coords);
    let (vals, vecs) = sym3_eigen(&cov);
    let tol = DEGENERATE_GAP * vals[0].abs().max(1.0);
    if vals[0] - vals[2] < tol {
        return Rotation3::identity();
    }
    let x = [1.0, 0.0, 0.0];
    let y = [0.0, 1.0, 0.0];
    let z = [0.0, 0.0, 1.0];
    let in_plane = |normal: Point3, first: Point3, second: Point3| -> Point3 {
        orthogonalize(first, &[normal], &[true])
            .or_else(|| orthogonalize(second, &[normal], &[true]))
            .expect("two canonical axes cannot both be parallel to one normal")
    };
    let (e1, e2) = if vals[0] - vals[1] < tol {
        let e3 = vecs[2];
        let e1 = orient(in_plane(e3, x, y), [0, 1, 2]);
        (e1, geom::cross(e3, e1))
    } else if vals[1] - vals[2] < tol {
        let e1 = orient(vecs[0], [0, 1, 2]);
        (e1, in_plane(e1, y, z))
    } else {
        (orient(vecs[0], [0, 1, 2]), vecs[1])
    };
    let e2 = orient(e2, [1, 2, 0]);
    let e3 = geom::cross(e1, e2);
    Rotation3([e1, e2, e3])
}
