//! Graph bisection models.

mod fm;
mod gnn;
mod kmeans;
mod multilevel;
mod wgraph;

pub use fm::fm_refine;
pub use gnn::GnnBisector;
pub use kmeans::{kmeans2, kmeans_bisect, KMeansBisector, KMeansResult};
pub use multilevel::{balance_bounds, multilevel_bisect, Bounds, MultilevelBisector, DEFAULT_BALANCE};

use crate::features::FeatureMatrix;
use crate::graph::DualGraph;
use crate::{Error, Result};

/// Per-node side, 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BisectionLabels(Vec<u8>);

impl BisectionLabels {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Contract(format!("label {} at node {i} is not 0 or 1", labels[i])));
        }
        Ok(BisectionLabels(labels))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> u8) -> Result<Self> {
        Self::new((0..n).map(f).collect())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    /// Number of nodes on `side`.
    pub fn count(&self, side: u8) -> usize {
        self.0.iter().filter(|&&l| l == side).count()
    }

    /// Both sides are non-empty.
    pub fn is_proper(&self) -> bool {
        let ones = self.count(1);
        ones > 0 && ones < self.len()
    }

    /// Node indices on `side`, ascending.
    pub fn side(&self, side: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.0[i] == side).collect()
    }
}

/// Anything that splits a graph in two.
pub trait BisectionModel: Sync {
    fn name(&self) -> &str;

    /// Whether the raw features must carry the ρ column.
    fn needs_physical(&self) -> bool {
        false
    }

    /// Splits `graph`, whose node `i` has raw features `x.row(i)`.
    fn bisect(&self, graph: &DualGraph, x: &FeatureMatrix, seed: u64) -> Result<BisectionLabels>;
}

pub(crate) fn check_rows(graph: &DualGraph, x: &FeatureMatrix) -> Result<()> {
    if graph.n() != x.rows() {
        return Err(Error::Shape(format!(
            "{} feature rows for a graph with {} nodes",
            x.rows(),
            graph.n()
        )));
    }
    Ok(())
}
