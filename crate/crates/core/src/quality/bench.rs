//! Wall-clock timing of single bisection calls.

use std::path::Path;
use std::time::Instant;

use crate::bisect::BisectionModel;
use crate::features::{build_features, FeatureMatrix};
use crate::graph::{extract_dual_graph, DualGraph};
use crate::mesh::TetMesh;
use crate::{Error, Result};

/// A prepared bisection input; graph and features are built outside the timed region.
#[derive(Clone, Debug)]
pub struct BenchCase {
    pub name: String,
    pub graph: DualGraph,
    pub features: FeatureMatrix,
    /// Features with the ρ column, when the mesh has region parameters.
    pub physical: Option<FeatureMatrix>,
}

impl BenchCase {
    pub fn from_mesh(name: impl Into<String>, mesh: &TetMesh) -> Result<Self> {
        Ok(BenchCase {
            name: name.into(),
            graph: extract_dual_graph(mesh)?,
            features: build_features(mesh, false)?,
            physical: if mesh.has_params() { Some(build_features(mesh, true)?) } else { None },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub model: String,
    pub mesh: String,
    pub n_nodes: usize,
    pub median_seconds: Option<f64>,
    pub error: Option<String>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Median over `reps` of one `bisect` call per (model, case). A failing model
/// yields a row with its error and the run continues.
pub fn bench_runtime(models: &[&dyn BisectionModel], cases: &[BenchCase], reps: usize, seed: u64) -> Vec<BenchRow> {
    let reps = reps.max(1);
    let mut rows = Vec::new();
    for model in models {
        for case in cases {
            let mut row = BenchRow {
                model: model.name().to_string(),
                mesh: case.name.clone(),
                n_nodes: case.graph.n(),
                median_seconds: None,
                error: None,
            };
            let x = if model.needs_physical() { case.physical.as_ref() } else { Some(&case.features) };
            let Some(x) = x else {
                row.error = Some("mesh has no region parameters".into());
                rows.push(row);
                continue;
            };
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                let t0 = Instant::now();
                let r = model.bisect(&case.graph, x, seed);
                let dt = t0.elapsed().as_secs_f64();
                if let Err(e) = r {
                    row.error = Some(e.to_string());
                    break;
                }
                times.push(dt);
            }
            if row.error.is_none() {
                row.median_seconds = Some(median(&times));
            }
            rows.push(row);
        }
    }
    rows
}

/// `model,mesh,n_nodes,median_seconds,error`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("model,mesh,n_nodes,median_seconds,error\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace(['"', ',', '\n'], " ");
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model,
            r.mesh,
            r.n_nodes,
            r.median_seconds.map(|t| format!("{t:.9}")).unwrap_or_default(),
            err
        ));
    }
    s
}

pub fn write_bench_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bench_csv(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisect::{KMeansBisector, MultilevelBisector};
    use crate::mesh::synth;

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0]), 3.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn rows_and_errors() {
        let case = BenchCase::from_mesh("cube", &synth::unit_cube(2, 0.1, 0)).unwrap();
        let gnn = crate::bisect::GnnBisector::new(crate::nn::init_params(crate::nn::ModelConfig::HeteroEnhanced, 0));
        let models: [&dyn BisectionModel; 3] = [&KMeansBisector::default(), &MultilevelBisector::default(), &gnn];
        let rows = bench_runtime(&models, &[case], 2, 0);
        assert_eq!(rows.len(), 3);
        assert!(rows[0].median_seconds.is_some() && rows[1].median_seconds.is_some());
        assert!(rows[2].error.is_some());
        let csv = bench_csv(&rows);
        assert!(csv.starts_with("model,mesh,n_nodes,median_seconds,error\nkmeans,cube,48,"));
    }
}
