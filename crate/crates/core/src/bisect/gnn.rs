use std::path::Path;

use super::{check_rows, BisectionLabels, BisectionModel};
use crate::features::{normalize_features, FeatureMatrix, NormOptions};
use crate::graph::DualGraph;
use crate::nn::{load_checkpoint, model_forward, ModelConfig, ModelParams};
use crate::par::Exec;
use crate::{Error, Result};

/// Rows whose two probabilities differ by less than this go to side 0.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// A trained network used as a bisection model.
#[derive(Clone, Debug)]
pub struct GnnBisector {
    params: ModelParams,
    name: String,
    pub exec: Exec,
    pub smooth_include_self: bool,
}

impl GnnBisector {
    pub fn new(params: ModelParams) -> Self {
        GnnBisector {
            name: format!("gnn-{}", params.config.name()),
            params,
            exec: Exec::default(),
            smooth_include_self: true,
        }
    }

    pub fn from_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(load_checkpoint(path)?))
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Class probabilities for every node.
    pub fn predict(&self, graph: &DualGraph, x: &FeatureMatrix) -> Result<crate::nn::Tensor2> {
        check_rows(graph, x)?;
        let cfg = self.params.config;
        if x.cols() != cfg.input_width() {
            return Err(Error::Shape(format!(
                "model '{}' expects {} feature columns, got {}",
                cfg.name(),
                cfg.input_width(),
                x.cols()
            )));
        }
        let opts = NormOptions {
            mode: cfg.norm_mode(),
            smooth_include_self: self.smooth_include_self,
        };
        let xn = normalize_features(x, graph, opts)?;
        model_forward(graph, &xn, &self.params, self.exec)
    }
}

impl BisectionModel for GnnBisector {
    fn name(&self) -> &str {
        &self.name
    }

    fn needs_physical(&self) -> bool {
        self.params.config == ModelConfig::HeteroEnhanced
    }

    fn bisect(&self, graph: &DualGraph, x: &FeatureMatrix, _seed: u64) -> Result<BisectionLabels> {
        check_rows(graph, x)?;
        if graph.n() <= 1 {
            return BisectionLabels::new(vec![0; graph.n()]);
        }
        let y = self.predict(graph, x)?;
        BisectionLabels::from_fn(graph.n(), |i| u8::from(y.get(i, 1) - y.get(i, 0) >= TIE_TOLERANCE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_features;
    use crate::graph::extract_dual_graph;
    use crate::mesh::synth;
    use crate::nn::init_params;

    #[test]
    fn single_node_gets_label_zero() {
        let m = synth::box_mesh([1, 1, 1], [0.0; 3], [1.0; 3], 0.0, 0).submesh(&[0]).unwrap().mesh;
        let g = extract_dual_graph(&m).unwrap();
        let x = build_features(&m, false).unwrap();
        let b = GnnBisector::new(init_params(ModelConfig::Enhanced, 0));
        assert_eq!(b.bisect(&g, &x, 0).unwrap().as_slice(), &[0]);
    }

    #[test]
    fn deterministic_and_width_checked() {
        let m = synth::unit_cube(3, 0.1, 2);
        let g = extract_dual_graph(&m).unwrap();
        let x = build_features(&m, false).unwrap();
        let b = GnnBisector::new(init_params(ModelConfig::Base, 4));
        assert_eq!(b.bisect(&g, &x, 0).unwrap(), b.bisect(&g, &x, 1).unwrap());
        let h = GnnBisector::new(init_params(ModelConfig::HeteroEnhanced, 4));
        assert!(h.needs_physical());
        assert!(matches!(h.bisect(&g, &x, 0), Err(Error::Shape(_))));
    }
}
