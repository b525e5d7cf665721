//! Reverse-mode differentiation over a per-forward operation record.
//!
//! Nodes are appended in evaluation order, which is a topological order, so
//! the backward pass is a single reverse sweep.

use super::tensor::{self, Tensor2};
use crate::graph::DualGraph;
use crate::par::Exec;
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    NeighborMean(Var),
    Tanh(Var),
    Softmax(Var),
}

struct Node {
    op: Op,
    value: Tensor2,
}

pub struct Tape<'g> {
    graph: Option<&'g DualGraph>,
    exec: Exec,
    nodes: Vec<Node>,
}

impl<'g> Tape<'g> {
    /// A tape whose neighbor aggregations run over `graph`.
    pub fn new(graph: &'g DualGraph, exec: Exec) -> Self {
        Tape {
            graph: Some(graph),
            exec,
            nodes: Vec::new(),
        }
    }

    /// A tape without a graph; neighbor aggregation is unavailable.
    pub fn detached(exec: Exec) -> Self {
        Tape {
            graph: None,
            exec,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor2) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Tensor2) -> Var {
        self.push(Op::Input, value)
    }

    /// Records parameter `index` (position in the model's flat tensor order).
    pub fn param(&mut self, index: usize, value: &Tensor2) -> Var {
        self.push(Op::Param(index), value.clone())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = tensor::matmul(self.value(a), self.value(b), self.exec)?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let mut v = self.value(x).clone();
        tensor::add_row_bias(&mut v, self.value(bias))?;
        Ok(self.push(Op::AddBias(x, bias), v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::Shape(format!("add: {:?} vs {:?}", x.shape(), y.shape())));
        }
        let mut v = x.clone();
        v.add_assign(y);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn neighbor_mean(&mut self, x: Var) -> Result<Var> {
        let graph = self
            .graph
            .ok_or_else(|| Error::Tape("neighbor aggregation on a tape without a graph".into()))?;
        let v = tensor::neighbor_mean(self.value(x), graph, self.exec)?;
        Ok(self.push(Op::NeighborMean(x), v))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        tensor::tanh_inplace(&mut v);
        self.push(Op::Tanh(x), v)
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let v = tensor::softmax_rows(self.value(x));
        self.push(Op::Softmax(x), v)
    }

    /// Back-propagates `seed = ∂L/∂output` and returns `∂L/∂param` for each
    /// of the `n_params` parameter slots (`None` when a slot was not used).
    pub fn backward(&self, output: Var, seed: &Tensor2, n_params: usize) -> Result<Vec<Option<Tensor2>>> {
        if self.nodes.is_empty() {
            return Err(Error::Tape("backward called before any forward pass".into()));
        }
        if output.0 >= self.nodes.len() {
            return Err(Error::Tape("output is not recorded on this tape".into()));
        }
        if seed.shape() != self.value(output).shape() {
            return Err(Error::Shape(format!(
                "seed {:?} for an output of shape {:?}",
                seed.shape(),
                self.value(output).shape()
            )));
        }
        let exec = self.exec;
        let mut grads: Vec<Option<Tensor2>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(seed.clone());
        let mut params: Vec<Option<Tensor2>> = (0..n_params).map(|_| None).collect();

        fn accumulate(slot: &mut Option<Tensor2>, g: Tensor2) {
            match slot {
                Some(acc) => acc.add_assign(&g),
                None => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match self.nodes[idx].op {
                Op::Input => {}
                Op::Param(p) => {
                    if p >= n_params {
                        return Err(Error::Tape(format!("parameter slot {p} out of range")));
                    }
                    accumulate(&mut params[p], g);
                }
                Op::MatMul(a, b) => {
                    let da = tensor::matmul_nt(&g, self.value(b), exec)?;
                    let db = tensor::matmul_tn(self.value(a), &g, exec)?;
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::AddBias(x, bias) => {
                    let db = tensor::column_sums(&g, exec);
                    accumulate(&mut grads[bias.0], db);
                    accumulate(&mut grads[x.0], g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[b.0], g.clone());
                    accumulate(&mut grads[a.0], g);
                }
                Op::NeighborMean(x) => {
                    let graph = self.graph.expect("recorded with a graph");
                    let dx = tensor::neighbor_mean_adjoint(&g, graph, exec)?;
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Tanh(x) => {
                    let y = &self.nodes[idx].value;
                    let mut dx = g;
                    dx.data_mut()
                        .iter_mut()
                        .zip(y.data())
                        .for_each(|(d, y)| *d *= 1.0 - y * y);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Softmax(x) => {
                    let y = &self.nodes[idx].value;
                    let mut dx = g;
                    let cols = y.cols();
                    for i in 0..y.rows() {
                        let yr = y.row(i);
                        let gr = dx.row_mut(i);
                        let dotp: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for c in 0..cols {
                            gr[c] = yr[c] * (gr[c] - dotp);
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                }
            }
        }
        Ok(params)
    }
}
