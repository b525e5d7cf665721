use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::tensor::{self, Tensor2};
use crate::features::{FeatureMatrix, NormMode};
use crate::graph::DualGraph;
use crate::par::Exec;
use crate::{Error, Result};

const SAGE_LAYERS: usize = 4;

/// Network configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelConfig {
    /// 4 → 4×SAGE(64) → 32 → 8 → 2.
    #[serde(rename = "base")]
    Base,
    /// 4 → 4×SAGE(128) → 64 → 32 → 8 → 2.
    #[serde(rename = "enhanced")]
    Enhanced,
    /// Enhanced with a fifth input column carrying ρ.
    #[serde(rename = "hetero")]
    HeteroEnhanced,
}

impl ModelConfig {
    pub fn input_width(self) -> usize {
        match self {
            ModelConfig::Base | ModelConfig::Enhanced => 4,
            ModelConfig::HeteroEnhanced => 5,
        }
    }

    pub fn sage_width(self) -> usize {
        match self {
            ModelConfig::Base => 64,
            ModelConfig::Enhanced | ModelConfig::HeteroEnhanced => 128,
        }
    }

    /// Output widths of the linear layers; the last is always 2.
    pub fn linear_widths(self) -> &'static [usize] {
        match self {
            ModelConfig::Base => &[32, 8, 2],
            ModelConfig::Enhanced | ModelConfig::HeteroEnhanced => &[64, 32, 8, 2],
        }
    }

    pub fn norm_mode(self) -> NormMode {
        match self {
            ModelConfig::Base => NormMode::Base,
            ModelConfig::Enhanced | ModelConfig::HeteroEnhanced => NormMode::Enhanced,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelConfig::Base => "base",
            ModelConfig::Enhanced => "enhanced",
            ModelConfig::HeteroEnhanced => "hetero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "base" => Some(ModelConfig::Base),
            "enhanced" => Some(ModelConfig::Enhanced),
            "hetero" => Some(ModelConfig::HeteroEnhanced),
            _ => None,
        }
    }

    /// `(rows, cols)` of every layer's weight, SAGE layers first.
    fn layer_shapes(self) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
        let w = self.sage_width();
        let sage = (0..SAGE_LAYERS)
            .map(|l| (if l == 0 { self.input_width() } else { w }, w))
            .collect();
        let mut prev = w;
        let linear = self
            .linear_widths()
            .iter()
            .map(|&out| {
                let s = (prev, out);
                prev = out;
                s
            })
            .collect();
        (sage, linear)
    }
}

/// Architecture switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchOptions {
    /// Whether SAGE layers add their bias.
    pub sage_bias: bool,
    /// Whether hidden linear layers apply tanh.
    pub mlp_tanh: bool,
}

impl Default for ArchOptions {
    fn default() -> Self {
        ArchOptions {
            sage_bias: true,
            mlp_tanh: true,
        }
    }
}

/// `H' = tanh(H·W_self + mean_N(H)·W_neigh + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SageLayer {
    pub w_self: Tensor2,
    pub w_neigh: Tensor2,
    pub bias: Tensor2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer {
    pub w: Tensor2,
    pub bias: Tensor2,
}

/// Network weights. The flat tensor order used by optimizers, tapes and
/// gradients is `w_self, w_neigh, bias` per SAGE layer, then `w, bias` per
/// linear layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub options: ArchOptions,
    pub sage: Vec<SageLayer>,
    pub linear: Vec<LinearLayer>,
}

impl ModelParams {
    pub fn tensors(&self) -> Vec<&Tensor2> {
        let mut out = Vec::with_capacity(3 * self.sage.len() + 2 * self.linear.len());
        for l in &self.sage {
            out.extend([&l.w_self, &l.w_neigh, &l.bias]);
        }
        for l in &self.linear {
            out.extend([&l.w, &l.bias]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = Vec::with_capacity(3 * self.sage.len() + 2 * self.linear.len());
        for l in &mut self.sage {
            out.extend([&mut l.w_self, &mut l.w_neigh, &mut l.bias]);
        }
        for l in &mut self.linear {
            out.extend([&mut l.w, &mut l.bias]);
        }
        out
    }

    pub fn n_tensors(&self) -> usize {
        3 * self.sage.len() + 2 * self.linear.len()
    }

    /// Whether flat slot `index` is a weight (as opposed to a bias).
    pub fn is_weight(&self, index: usize) -> bool {
        let s = 3 * self.sage.len();
        if index < s {
            index % 3 != 2
        } else {
            (index - s) % 2 == 0
        }
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// ‖W‖₂²: sum of squared weight entries, biases excluded.
    pub fn weight_norm_sq(&self) -> f64 {
        self.tensors()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_weight(*i))
            .map(|(_, t)| t.sum_squares())
            .sum()
    }

    /// Zero tensors shaped like each parameter slot.
    pub fn zeros_like(&self) -> Vec<Tensor2> {
        self.tensors()
            .iter()
            .map(|t| Tensor2::zeros(t.rows(), t.cols()))
            .collect()
    }

    fn empty(config: ModelConfig, options: ArchOptions) -> Self {
        let (sage, linear) = config.layer_shapes();
        ModelParams {
            config,
            options,
            sage: sage
                .into_iter()
                .map(|(i, o)| SageLayer {
                    w_self: Tensor2::zeros(i, o),
                    w_neigh: Tensor2::zeros(i, o),
                    bias: Tensor2::zeros(1, o),
                })
                .collect(),
            linear: linear
                .into_iter()
                .map(|(i, o)| LinearLayer {
                    w: Tensor2::zeros(i, o),
                    bias: Tensor2::zeros(1, o),
                })
                .collect(),
        }
    }

    /// Zero-initialized parameters with the shapes of `config`.
    pub fn zeros(config: ModelConfig) -> Self {
        Self::empty(config, ArchOptions::default())
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let (sage, linear) = self.config.layer_shapes();
        if sage.len() != self.sage.len() || linear.len() != self.linear.len() {
            return Err(Error::Shape(format!(
                "{} config expects {} SAGE and {} linear layers",
                self.config.name(),
                sage.len(),
                linear.len()
            )));
        }
        for (l, (&(i, o), layer)) in sage.iter().zip(&self.sage).enumerate() {
            if layer.w_self.shape() != (i, o)
                || layer.w_neigh.shape() != (i, o)
                || layer.bias.shape() != (1, o)
            {
                return Err(Error::Shape(format!("SAGE layer {l} does not match {i}x{o}")));
            }
        }
        for (l, (&(i, o), layer)) in linear.iter().zip(&self.linear).enumerate() {
            if layer.w.shape() != (i, o) || layer.bias.shape() != (1, o) {
                return Err(Error::Shape(format!("linear layer {l} does not match {i}x{o}")));
            }
        }
        Ok(())
    }
}

/// Glorot-uniform weights (bound √(6/(fan_in+fan_out))) and zero biases.
pub fn init_params(config: ModelConfig, seed: u64) -> ModelParams {
    init_params_with(config, ArchOptions::default(), seed)
}

pub fn init_params_with(config: ModelConfig, options: ArchOptions, seed: u64) -> ModelParams {
    let mut params = ModelParams::empty(config, options);
    let mut rng = crate::seed::rng(seed);
    let n = params.n_tensors();
    let is_weight: Vec<bool> = (0..n).map(|i| params.is_weight(i)).collect();
    for (t, w) in params.tensors_mut().into_iter().zip(is_weight) {
        if !w {
            continue;
        }
        let bound = (6.0 / (t.rows() + t.cols()) as f64).sqrt();
        for v in t.data_mut() {
            *v = (2.0 * rng.random::<f64>() - 1.0) * bound;
        }
    }
    params
}

fn check_input(x: &FeatureMatrix, graph: &DualGraph, params: &ModelParams) -> Result<()> {
    if x.cols() != params.config.input_width() {
        return Err(Error::Shape(format!(
            "{} model expects {} feature columns, got {}",
            params.config.name(),
            params.config.input_width(),
            x.cols()
        )));
    }
    if x.rows() != graph.n() {
        return Err(Error::Shape(format!(
            "{} feature rows for a graph with {} nodes",
            x.rows(),
            graph.n()
        )));
    }
    Ok(())
}

/// One SAGE convolution: `tanh(H·W_self + mean_N(H)·W_neigh + b)`.
pub fn sage_layer(
    h: &Tensor2,
    graph: &DualGraph,
    layer: &SageLayer,
    with_bias: bool,
    exec: Exec,
) -> Result<Tensor2> {
    let agg = tensor::neighbor_mean(h, graph, exec)?;
    let mut out = tensor::matmul(h, &layer.w_self, exec)?;
    out.add_assign(&tensor::matmul(&agg, &layer.w_neigh, exec)?);
    if with_bias {
        tensor::add_row_bias(&mut out, &layer.bias)?;
    }
    tensor::tanh_inplace(&mut out);
    Ok(out)
}

/// Inference forward pass on normalized features; returns the `n × 2`
/// class-probability matrix Y.
pub fn model_forward(
    graph: &DualGraph,
    x: &FeatureMatrix,
    params: &ModelParams,
    exec: Exec,
) -> Result<Tensor2> {
    check_input(x, graph, params)?;
    let mut h = x.to_tensor();
    for layer in &params.sage {
        h = sage_layer(&h, graph, layer, params.options.sage_bias, exec)?;
    }
    let last = params.linear.len() - 1;
    for (l, layer) in params.linear.iter().enumerate() {
        h = tensor::matmul(&h, &layer.w, exec)?;
        tensor::add_row_bias(&mut h, &layer.bias)?;
        if l < last && params.options.mlp_tanh {
            tensor::tanh_inplace(&mut h);
        }
    }
    Ok(tensor::softmax_rows(&h))
}

/// Forward pass recorded on `tape`; returns the handle of Y.
pub fn model_forward_tape(
    tape: &mut Tape<'_>,
    x: &FeatureMatrix,
    graph: &DualGraph,
    params: &ModelParams,
) -> Result<Var> {
    check_input(x, graph, params)?;
    let mut h = tape.input(x.to_tensor());
    let mut slot = 0;
    for layer in &params.sage {
        let ws = tape.param(slot, &layer.w_self);
        let wn = tape.param(slot + 1, &layer.w_neigh);
        let agg = tape.neighbor_mean(h)?;
        let a = tape.matmul(h, ws)?;
        let b = tape.matmul(agg, wn)?;
        let mut z = tape.add(a, b)?;
        if params.options.sage_bias {
            let bias = tape.param(slot + 2, &layer.bias);
            z = tape.add_bias(z, bias)?;
        }
        h = tape.tanh(z);
        slot += 3;
    }
    let last = params.linear.len() - 1;
    for (l, layer) in params.linear.iter().enumerate() {
        let w = tape.param(slot, &layer.w);
        let b = tape.param(slot + 1, &layer.bias);
        let z = tape.matmul(h, w)?;
        h = tape.add_bias(z, b)?;
        if l < last && params.options.mlp_tanh {
            h = tape.tanh(h);
        }
        slot += 2;
    }
    Ok(tape.softmax(h))
}
