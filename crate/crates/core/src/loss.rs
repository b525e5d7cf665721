//! Unsupervised bisection losses.
//!
//! The expected normalized cut sums over directed edges (each undirected edge
//! in both orientations):
//!
//! `L(Y, G) = Σ_(i→j) Y_i1 (1 − Y_j1) / Γ_1 + Y_i2 (1 − Y_j2) / Γ_2`, with
//! `Γ_k = Σ_i Y_ik D_i`.
//!
//! For a hard bipartition this is `cut · (1/vol(S1) + 1/vol(S2))`.

use crate::features::{minmax_unit, FeatureMatrix};
use crate::graph::DualGraph;
use crate::nn::{model_forward_tape, ModelParams, Tape, Tensor2};
use crate::par::Exec;
use crate::{Error, Result};

/// Class mass below which the normalized cut is undefined.
pub const GAMMA_MIN: f64 = 1e-12;

/// Default weight of the physical penalty.
pub const DEFAULT_ALPHA: f64 = 1.28;
/// Default weight of the regularized normalized cut.
pub const DEFAULT_BETA: f64 = 2.2e-4;

fn check_y(y: &Tensor2, graph: &DualGraph) -> Result<()> {
    if y.cols() != 2 || y.rows() != graph.n() {
        return Err(Error::Shape(format!(
            "Y is {}x{}, expected {}x2",
            y.rows(),
            y.cols(),
            graph.n()
        )));
    }
    Ok(())
}

struct CutTerms {
    a: [f64; 2],
    gamma: [f64; 2],
}

fn cut_terms(y: &Tensor2, graph: &DualGraph) -> Result<CutTerms> {
    check_y(y, graph)?;
    let mut a = [0.0; 2];
    let mut gamma = [0.0; 2];
    for i in 0..graph.n() {
        let nb = graph.neighbors(i);
        for k in 0..2 {
            let yik = y.get(i, k);
            gamma[k] += yik * nb.len() as f64;
            let s: f64 = nb.iter().map(|&j| 1.0 - y.get(j, k)).sum();
            a[k] += yik * s;
        }
    }
    if let Some(&g) = gamma.iter().find(|g| **g < GAMMA_MIN) {
        return Err(Error::DegeneratePartition { gamma: g });
    }
    Ok(CutTerms { a, gamma })
}

/// Expected normalized cut of the soft bipartition `Y`.
pub fn normalized_cut_loss(y: &Tensor2, graph: &DualGraph) -> Result<f64> {
    let t = cut_terms(y, graph)?;
    Ok(t.a[0] / t.gamma[0] + t.a[1] / t.gamma[1])
}

/// Normalized cut and its gradient with respect to `Y`.
///
/// `∂L/∂Y_mk = (D_m − 2 Σ_(j∈N(m)) Y_jk) / Γ_k − A_k D_m / Γ_k²`.
pub fn normalized_cut_with_grad(y: &Tensor2, graph: &DualGraph) -> Result<(f64, Tensor2)> {
    let t = cut_terms(y, graph)?;
    let mut g = Tensor2::zeros(graph.n(), 2);
    for m in 0..graph.n() {
        let nb = graph.neighbors(m);
        let d = nb.len() as f64;
        for k in 0..2 {
            let s: f64 = nb.iter().map(|&j| y.get(j, k)).sum();
            let da = d - 2.0 * s;
            g.set(m, k, da / t.gamma[k] - t.a[k] * d / (t.gamma[k] * t.gamma[k]));
        }
    }
    Ok((t.a[0] / t.gamma[0] + t.a[1] / t.gamma[1], g))
}

/// `L(Y, G) + λ‖W‖₂²`.
pub fn homogeneous_loss(y: &Tensor2, graph: &DualGraph, params: &ModelParams, lambda: f64) -> Result<f64> {
    Ok(normalized_cut_loss(y, graph)? + lambda * params.weight_norm_sq())
}

/// `P` with rows `(p_i, 1 − p_i)`, `p_i ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalPenaltyMatrix(Tensor2);

impl PhysicalPenaltyMatrix {
    /// Min-max rescales raw per-node ρ to `p ∈ [0, 1]`.
    pub fn from_rho(rho: &[f64]) -> Self {
        Self::from_unit(&minmax_unit(rho)).expect("rescaled values lie in [0, 1]")
    }

    /// Uses the raw ρ column of a feature matrix.
    pub fn from_features(x: &FeatureMatrix) -> Result<Self> {
        if !x.has_physical() {
            return Err(Error::Config("physical penalty needs a ρ feature column".into()));
        }
        Ok(Self::from_rho(&x.column(4)))
    }

    pub fn from_unit(p: &[f64]) -> Result<Self> {
        if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Contract(format!("physical value {v} outside [0, 1]")));
        }
        let mut t = Tensor2::zeros(p.len(), 2);
        for (i, &v) in p.iter().enumerate() {
            t.set(i, 0, v);
            t.set(i, 1, 1.0 - v);
        }
        Ok(PhysicalPenaltyMatrix(t))
    }

    pub fn matrix(&self) -> &Tensor2 {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        PhysicalPenaltyMatrix(self.0.permute_rows(perm))
    }
}

/// `Σ P ⊙ Y` over all entries.
pub fn physical_penalty(p: &PhysicalPenaltyMatrix, y: &Tensor2) -> Result<f64> {
    if p.0.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "P is {:?} but Y is {:?}",
            p.0.shape(),
            y.shape()
        )));
    }
    Ok(p.0.data().iter().zip(y.data()).map(|(a, b)| a * b).sum())
}

/// `α·𝒫(P, Y) + β·(L(Y, G) + λ‖W‖₂²)`.
pub fn heterogeneous_loss(
    p: &PhysicalPenaltyMatrix,
    y: &Tensor2,
    graph: &DualGraph,
    params: &ModelParams,
    alpha: f64,
    beta: f64,
    lambda: f64,
) -> Result<f64> {
    Ok(alpha * physical_penalty(p, y)? + beta * homogeneous_loss(y, graph, params, lambda)?)
}

/// Training objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    Homogeneous { lambda: f64 },
    Heterogeneous { alpha: f64, beta: f64, lambda: f64 },
}

impl Objective {
    fn penalty<'p>(&self, penalty: Option<&'p PhysicalPenaltyMatrix>) -> Result<Option<&'p PhysicalPenaltyMatrix>> {
        match self {
            Objective::Homogeneous { .. } => Ok(None),
            Objective::Heterogeneous { .. } => penalty
                .map(Some)
                .ok_or_else(|| Error::Config("heterogeneous loss needs a physical penalty matrix".into())),
        }
    }

    /// Loss value for a given output `Y`.
    pub fn value(
        &self,
        y: &Tensor2,
        graph: &DualGraph,
        params: &ModelParams,
        penalty: Option<&PhysicalPenaltyMatrix>,
    ) -> Result<f64> {
        match *self {
            Objective::Homogeneous { lambda } => homogeneous_loss(y, graph, params, lambda),
            Objective::Heterogeneous { alpha, beta, lambda } => {
                let p = self.penalty(penalty)?.expect("checked");
                heterogeneous_loss(p, y, graph, params, alpha, beta, lambda)
            }
        }
    }

    /// Forward on `x` (already normalized), loss, and gradients for every
    /// parameter slot of `params`.
    pub fn value_and_grad(
        &self,
        params: &ModelParams,
        graph: &DualGraph,
        x: &FeatureMatrix,
        penalty: Option<&PhysicalPenaltyMatrix>,
        exec: Exec,
    ) -> Result<(f64, Vec<Tensor2>)> {
        let penalty = self.penalty(penalty)?;
        let mut tape = Tape::new(graph, exec);
        let out = model_forward_tape(&mut tape, x, graph, params)?;
        let y = tape.value(out);
        let (cut, mut seed) = normalized_cut_with_grad(y, graph)?;
        let reg = params.weight_norm_sq();
        let (loss, reg_scale) = match *self {
            Objective::Homogeneous { lambda } => (cut + lambda * reg, 2.0 * lambda),
            Objective::Heterogeneous { alpha, beta, lambda } => {
                let p = penalty.expect("checked");
                let pen = physical_penalty(p, y)?;
                seed.scale(beta);
                seed.axpy(alpha, p.matrix());
                (alpha * pen + beta * (cut + lambda * reg), 2.0 * beta * lambda)
            }
        };
        let grads = tape.backward(out, &seed, params.n_tensors())?;
        let mut full = Vec::with_capacity(grads.len());
        for (i, (g, w)) in grads.into_iter().zip(params.tensors()).enumerate() {
            let mut g = g.unwrap_or_else(|| Tensor2::zeros(w.rows(), w.cols()));
            if params.is_weight(i) && reg_scale != 0.0 {
                g.axpy(reg_scale, w);
            }
            full.push(g);
        }
        Ok((loss, full))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, ModelConfig};
    use approx::assert_relative_eq;

    fn hard(labels: &[usize]) -> Tensor2 {
        Tensor2::from_fn(labels.len(), 2, |i, k| if labels[i] == k { 1.0 } else { 0.0 })
    }

    #[test]
    fn one_class_is_degenerate() {
        let g = DualGraph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(matches!(
            normalized_cut_loss(&hard(&[0, 0]), &g),
            Err(Error::DegeneratePartition { .. })
        ));
    }

    #[test]
    fn hand_values() {
        let g = DualGraph::from_edges(2, &[(0, 1)]).unwrap();
        assert_relative_eq!(normalized_cut_loss(&hard(&[0, 1]), &g).unwrap(), 2.0);
        let path = DualGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_relative_eq!(normalized_cut_loss(&hard(&[0, 1, 1]), &path).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = DualGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        let y = Tensor2::from_fn(5, 2, |i, k| {
            let p = 0.15 + 0.17 * i as f64;
            if k == 0 { p } else { 1.0 - p }
        });
        let (_, grad) = normalized_cut_with_grad(&y, &g).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            for k in 0..2 {
                let mut yp = y.clone();
                yp.set(i, k, y.get(i, k) + h);
                let mut ym = y.clone();
                ym.set(i, k, y.get(i, k) - h);
                let fd = (normalized_cut_loss(&yp, &g).unwrap() - normalized_cut_loss(&ym, &g).unwrap()) / (2.0 * h);
                assert!((fd - grad.get(i, k)).abs() < 1e-8, "{fd} vs {}", grad.get(i, k));
            }
        }
    }

    #[test]
    fn regularizer_only_case() {
        // Edgeless graph: the cut term needs Γ > 0, so evaluate the pieces.
        let mut params = crate::nn::ModelParams::zeros(ModelConfig::Base);
        params.linear[2].w.set(0, 0, 2.0);
        assert_eq!(params.weight_norm_sq(), 4.0);
        let g = DualGraph::from_edges(2, &[(0, 1)]).unwrap();
        let y = hard(&[0, 1]);
        let l0 = homogeneous_loss(&y, &g, &params, 0.0).unwrap();
        assert_eq!(l0, normalized_cut_loss(&y, &g).unwrap());
        let l1 = homogeneous_loss(&y, &g, &params, 1.0).unwrap();
        assert_relative_eq!(l1 - l0, 4.0);
    }

    #[test]
    fn penalty_cases() {
        let p = PhysicalPenaltyMatrix::from_unit(&[1.0, 0.0]).unwrap();
        assert_eq!(physical_penalty(&p, &hard(&[1, 0])).unwrap(), 0.0);
        assert_eq!(physical_penalty(&p, &hard(&[0, 1])).unwrap(), 2.0);
        assert!(physical_penalty(&p, &Tensor2::zeros(3, 2)).is_err());
        assert!(PhysicalPenaltyMatrix::from_unit(&[1.5]).is_err());
        let q = PhysicalPenaltyMatrix::from_rho(&[2.0, 4.0, 3.0]);
        assert_eq!(q.matrix().data(), &[0.0, 1.0, 1.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn hetero_with_zero_alpha_is_scaled_homogeneous() {
        let g = DualGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let params = init_params(ModelConfig::HeteroEnhanced, 0);
        let y = Tensor2::from_vec(3, 2, vec![0.9, 0.1, 0.4, 0.6, 0.2, 0.8]);
        let p = PhysicalPenaltyMatrix::from_unit(&[0.0, 0.5, 1.0]).unwrap();
        let het = heterogeneous_loss(&p, &y, &g, &params, 0.0, 0.3, 1e-5).unwrap();
        let hom = homogeneous_loss(&y, &g, &params, 1e-5).unwrap();
        assert_relative_eq!(het, 0.3 * hom, max_relative = 1e-15);
    }

    #[test]
    fn objective_requires_penalty() {
        let g = DualGraph::from_edges(2, &[(0, 1)]).unwrap();
        let params = init_params(ModelConfig::HeteroEnhanced, 0);
        let x = FeatureMatrix::new(2, 5, vec![0.0; 10]).unwrap();
        let obj = Objective::Heterogeneous { alpha: 1.0, beta: 1.0, lambda: 0.0 };
        assert!(matches!(
            obj.value_and_grad(&params, &g, &x, None, Exec::Sequential),
            Err(Error::Config(_))
        ));
    }
}
