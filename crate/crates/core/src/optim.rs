//! Adam with bias correction.

use crate::nn::{ModelParams, Tensor2};
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor2>,
    pub v: Vec<Tensor2>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// Applies one Adam update with learning rate `lr`.
///
/// A non-finite gradient aborts before any parameter is touched.
pub fn adam_step(params: &mut ModelParams, grads: &[Tensor2], state: &mut AdamState, lr: f64) -> Result<()> {
    if grads.len() != params.n_tensors() || state.m.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} gradients for {} parameter tensors",
            grads.len(),
            params.n_tensors()
        )));
    }
    for (i, (g, p)) in grads.iter().zip(params.tensors()).enumerate() {
        if g.shape() != p.shape() {
            return Err(Error::Shape(format!("gradient {i} is {:?}, parameter is {:?}", g.shape(), p.shape())));
        }
        if !g.is_finite() {
            let bad = g.data().iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(Error::Numeric(format!(
                "non-finite gradient in tensor {i} at entry {bad} (step {})",
                state.step + 1
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let pd = p.data_mut();
        let md = m.data_mut();
        let vd = v.data_mut();
        for (k, &gk) in g.data().iter().enumerate() {
            md[k] = b1 * md[k] + (1.0 - b1) * gk;
            vd[k] = b2 * vd[k] + (1.0 - b2) * gk * gk;
            let mhat = md[k] / bc1;
            let vhat = vd[k] / bc2;
            pd[k] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
