//! Tensors, reverse-mode differentiation and optimizers.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{config_hash, Checkpoint, FORMAT_VERSION, MAGIC};
pub use gradcheck::{gradcheck, gradcheck_params, relative_error, REL_FLOOR};
pub use optim::{adamw_step, clip_global_norm, AdamWConfig, OptimizerState};
pub use params::ParamSet;
pub use tape::{cosine_similarity, Gradients, NodeId, Tape, COSINE_EPS};
pub use tensor::Tensor;
