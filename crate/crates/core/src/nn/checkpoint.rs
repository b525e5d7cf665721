//! JSON checkpoints:
//! `{"version":1,"config":"enhanced","layers":[{"kind":"sage","w_self":[..],"w_neigh":[..],"bias":[..],"rows":..,"cols":..}, ..]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ArchOptions, LinearLayer, ModelConfig, ModelParams, SageLayer};
use super::tensor::Tensor2;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: ModelConfig,
    #[serde(default)]
    options: ArchOptions,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LayerRecord {
    Sage {
        w_self: Vec<f64>,
        w_neigh: Vec<f64>,
        bias: Vec<f64>,
        rows: usize,
        cols: usize,
    },
    Linear {
        w: Vec<f64>,
        bias: Vec<f64>,
        rows: usize,
        cols: usize,
    },
}

fn tensor(rows: usize, cols: usize, data: Vec<f64>, what: &str) -> Result<Tensor2> {
    Tensor2::try_from_vec(rows, cols, data).map_err(|e| Error::Checkpoint(format!("{what}: {e}")))
}

fn to_file(params: &ModelParams) -> CheckpointFile {
    let mut layers = Vec::new();
    for l in &params.sage {
        layers.push(LayerRecord::Sage {
            rows: l.w_self.rows(),
            cols: l.w_self.cols(),
            w_self: l.w_self.data().to_vec(),
            w_neigh: l.w_neigh.data().to_vec(),
            bias: l.bias.data().to_vec(),
        });
    }
    for l in &params.linear {
        layers.push(LayerRecord::Linear {
            rows: l.w.rows(),
            cols: l.w.cols(),
            w: l.w.data().to_vec(),
            bias: l.bias.data().to_vec(),
        });
    }
    CheckpointFile {
        version: CHECKPOINT_VERSION,
        config: params.config,
        options: params.options,
        layers,
    }
}

fn from_file(file: CheckpointFile) -> Result<ModelParams> {
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint version {} (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    let mut sage = Vec::new();
    let mut linear = Vec::new();
    for (i, layer) in file.layers.into_iter().enumerate() {
        match layer {
            LayerRecord::Sage { w_self, w_neigh, bias, rows, cols } => {
                if !linear.is_empty() {
                    return Err(Error::Checkpoint(format!("layer {i}: SAGE layer after linear layers")));
                }
                sage.push(SageLayer {
                    w_self: tensor(rows, cols, w_self, "w_self")?,
                    w_neigh: tensor(rows, cols, w_neigh, "w_neigh")?,
                    bias: tensor(1, cols, bias, "bias")?,
                });
            }
            LayerRecord::Linear { w, bias, rows, cols } => linear.push(LinearLayer {
                w: tensor(rows, cols, w, "w")?,
                bias: tensor(1, cols, bias, "bias")?,
            }),
        }
    }
    let params = ModelParams {
        config: file.config,
        options: file.options,
        sage,
        linear,
    };
    params
        .check_shapes()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if params.tensors().iter().any(|t| !t.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter value".into()));
    }
    Ok(params)
}

pub(crate) fn to_json(params: &ModelParams) -> String {
    serde_json::to_string(&to_file(params)).expect("checkpoint serializes")
}

pub(crate) fn from_json(text: &str) -> Result<ModelParams> {
    let file: CheckpointFile =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    from_file(file)
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

/// Loads a checkpoint and checks it was saved for `config`.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, config: ModelConfig) -> Result<ModelParams> {
    let params = load_checkpoint(path)?;
    if params.config != config {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a {} model, expected {}",
            params.config.name(),
            config.name()
        )));
    }
    Ok(params)
}
