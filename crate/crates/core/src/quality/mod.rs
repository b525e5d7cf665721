//! Element quality metrics and reports.

mod ball;
mod bench;

pub use ball::{min_enclosing_ball, Ball};
pub use bench::{bench_csv, bench_runtime, median, write_bench_csv, BenchCase, BenchRow};

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::mesh::geom::{centroid, point_in_tet, point_triangle_distance, tet_incenter, Point3};
use crate::mesh::{Agglomeration, TetMesh};
use crate::par::Exec;
use crate::seed;
use crate::{Error, Result};

/// Inscribed-to-circumscribed radius ratio of an element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleRatio {
    pub value: f64,
    pub inscribed: f64,
    pub circumscribed: f64,
    /// Flat or otherwise degenerate element; `value` is 0.
    pub degenerate: bool,
}

/// Faces used by exactly one tet of `tets`, as vertex triples.
pub fn boundary_faces(mesh: &TetMesh, tets: &[usize]) -> Vec<[usize; 3]> {
    let mut count: HashMap<[usize; 3], (usize, [usize; 3])> = HashMap::new();
    for &t in tets {
        let v = mesh.tets()[t];
        for skip in 0..4 {
            let face: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| v[k]).collect();
            let f = [face[0], face[1], face[2]];
            let mut key = f;
            key.sort_unstable();
            count.entry(key).or_insert((0, f)).0 += 1;
        }
    }
    let mut out: Vec<(_, _)> = count.into_iter().filter(|(_, (c, _))| *c == 1).map(|(k, (_, f))| (k, f)).collect();
    out.sort_unstable();
    out.into_iter().map(|(_, f)| f).collect()
}

/// Lower estimate of the largest inscribed sphere radius: the best distance
/// to the boundary over tet incenters, tet centroids and the vertex average.
pub fn inscribed_radius(mesh: &TetMesh, tets: &[usize]) -> f64 {
    let faces = boundary_faces(mesh, tets);
    let v = mesh.vertices();
    let clearance = |q: Point3| {
        faces
            .iter()
            .map(|f| point_triangle_distance(q, v[f[0]], v[f[1]], v[f[2]]))
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = 0.0f64;
    for &t in tets {
        let p = mesh.tet_points(t);
        best = best.max(clearance(tet_incenter(&p))).max(clearance(centroid(&p)));
    }
    let verts: Vec<Point3> = mesh.vertices_of(tets).into_iter().map(|i| v[i]).collect();
    let avg = centroid(&verts);
    let scale = mesh.diameter_of(tets);
    if tets.iter().any(|&t| point_in_tet(avg, &mesh.tet_points(t), 1e-12 * scale)) {
        best = best.max(clearance(avg));
    }
    best
}

pub fn circle_ratio(mesh: &TetMesh, tets: &[usize], seed: u64) -> CircleRatio {
    let pts: Vec<Point3> = mesh.vertices_of(tets).into_iter().map(|i| mesh.vertices()[i]).collect();
    let circumscribed = min_enclosing_ball(&pts, seed).radius;
    let inscribed = inscribed_radius(mesh, tets);
    if !(circumscribed > 0.0) || !(inscribed > 1e-14 * circumscribed) {
        return CircleRatio {
            value: 0.0,
            inscribed,
            circumscribed,
            degenerate: true,
        };
    }
    CircleRatio {
        value: (inscribed / circumscribed).min(1.0),
        inscribed,
        circumscribed,
        degenerate: false,
    }
}

/// `diam(K) / max_K diam(K)`.
pub fn uniformity_factors(diameters: &[f64]) -> Vec<f64> {
    let h = diameters.iter().copied().fold(0.0, f64::max);
    if h <= 0.0 {
        return vec![0.0; diameters.len()];
    }
    diameters.iter().map(|d| d / h).collect()
}

/// `|V(K) − V_target| / V_target` with `V_target` the equal share of the total.
pub fn volume_differences(volumes: &[f64]) -> Vec<f64> {
    let target = volumes.iter().sum::<f64>() / volumes.len() as f64;
    volumes.iter().map(|v| (v - target).abs() / target).collect()
}

/// Whether each element spans at least two distinct ρ values.
pub fn mixed_elements(mesh: &TetMesh, agg: &Agglomeration) -> Vec<bool> {
    agg.elements()
        .iter()
        .map(|tets| {
            let first = mesh.rho_of_tet(tets[0]);
            tets.iter().any(|&t| mesh.rho_of_tet(t) != first)
        })
        .collect()
}

/// Percentage of elements containing more than one ρ value.
pub fn heterogeneous_elements(mesh: &TetMesh, agg: &Agglomeration) -> Result<f64> {
    if !mesh.has_params() {
        return Err(Error::Config("heterogeneous-element count needs region parameters".into()));
    }
    agg.check_source(mesh)?;
    let mixed = mixed_elements(mesh, agg);
    Ok(100.0 * mixed.iter().filter(|&&m| m).count() as f64 / mixed.len() as f64)
}

/// Percentage reduction in element count.
pub fn reduction_xi(n_tets: usize, n_agg: usize) -> Result<f64> {
    if n_agg == 0 || n_agg > n_tets {
        return Err(Error::Contract(format!("invalid element counts {n_tets} -> {n_agg}")));
    }
    Ok(100.0 * (n_tets - n_agg) as f64 / n_tets as f64)
}

/// Linear-interpolation quantile of sorted data, `q ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElementQuality {
    pub n_tets: usize,
    pub volume: f64,
    pub diameter: f64,
    pub cr: f64,
    pub cr_degenerate: bool,
    pub uf: f64,
    pub vd: f64,
    pub mixed: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    pub mean: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Self {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Distribution {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            q05: quantile(&s, 0.05),
            q25: quantile(&s, 0.25),
            q50: quantile(&s, 0.5),
            q75: quantile(&s, 0.75),
            q95: quantile(&s, 0.95),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub elements: Vec<ElementQuality>,
    pub n_tets: usize,
    pub n_agg: usize,
    /// Percent; present when the mesh carries region parameters.
    pub he: Option<f64>,
    pub xi: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    n_tets: usize,
    n_agg: usize,
    xi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    he: Option<f64>,
    cr: &'a Distribution,
    uf: &'a Distribution,
    vd: &'a Distribution,
}

impl QualityReport {
    pub fn cr(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.cr).collect()
    }

    pub fn uf(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.uf).collect()
    }

    pub fn vd(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.vd).collect()
    }

    pub fn mean_cr(&self) -> f64 {
        mean(&self.cr())
    }

    pub fn mean_uf(&self) -> f64 {
        mean(&self.uf())
    }

    pub fn mean_vd(&self) -> f64 {
        mean(&self.vd())
    }

    /// `element_id,n_tets,volume,diameter,CR,UF,VD,mixed_flag`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("element_id,n_tets,volume,diameter,CR,UF,VD,mixed_flag\n");
        for (i, e) in self.elements.iter().enumerate() {
            let mixed = e.mixed.map(|m| u8::from(m).to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{i},{},{},{},{},{},{},{mixed}\n",
                e.n_tets, e.volume, e.diameter, e.cr, e.uf, e.vd
            ));
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let summary = Summary {
            n_tets: self.n_tets,
            n_agg: self.n_agg,
            xi: self.xi,
            he: self.he,
            cr: &Distribution::of(&self.cr()),
            uf: &Distribution::of(&self.uf()),
            vd: &Distribution::of(&self.vd()),
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }

    /// Writes `report.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (name, text) in [("report.csv", self.to_csv()), ("summary.json", self.summary_json())] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-element metrics of `agg` over `mesh`.
pub fn evaluate(mesh: &TetMesh, agg: &Agglomeration, seed: u64, exec: Exec) -> Result<QualityReport> {
    agg.check_source(mesh)?;
    let geo: Vec<(f64, f64, CircleRatio)> = exec.map_range(agg.n_elements(), |e| {
        let tets = &agg.elements()[e];
        let volume = tets.iter().map(|&t| mesh.tet_geometry(t).volume).sum();
        let cr = circle_ratio(mesh, tets, seed::derive(seed, [e as u64]));
        (volume, mesh.diameter_of(tets), cr)
    });
    let volumes: Vec<f64> = geo.iter().map(|g| g.0).collect();
    let diameters: Vec<f64> = geo.iter().map(|g| g.1).collect();
    let uf = uniformity_factors(&diameters);
    let vd = volume_differences(&volumes);
    let mixed = mesh.has_params().then(|| mixed_elements(mesh, agg));
    let elements = (0..agg.n_elements())
        .map(|e| ElementQuality {
            n_tets: agg.elements()[e].len(),
            volume: volumes[e],
            diameter: diameters[e],
            cr: geo[e].2.value,
            cr_degenerate: geo[e].2.degenerate,
            uf: uf[e],
            vd: vd[e],
            mixed: mixed.as_ref().map(|m| m[e]),
        })
        .collect();
    let he = match mixed {
        Some(m) => Some(100.0 * m.iter().filter(|&&x| x).count() as f64 / m.len() as f64),
        None => None,
    };
    Ok(QualityReport {
        elements,
        n_tets: mesh.n_tets(),
        n_agg: agg.n_elements(),
        he,
        xi: reduction_xi(mesh.n_tets(), agg.n_elements())?,
    })
}
