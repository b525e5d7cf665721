//! Dense tensors, a reverse-mode gradient tape and the SAGE bisection networks.

mod checkpoint;
mod model;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, CHECKPOINT_VERSION};
pub use model::{
    init_params, model_forward, model_forward_tape, sage_layer, ArchOptions, LinearLayer,
    ModelConfig, ModelParams, SageLayer,
};
pub use tape::{Tape, Var};
pub use tensor::Tensor2;
