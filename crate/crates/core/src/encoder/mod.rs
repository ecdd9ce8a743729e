//! Sequence encoder and projection head.

mod config;
mod head;
mod transformer;

use std::path::Path;

pub use config::{Activation, EncoderConfig, HeadConfig, Positional};
pub use head::ProjectionHead;
pub use transformer::TransformerEncoder;

use crate::error::{Error, Result};
use crate::numkernel::{config_hash, Checkpoint, ParamSet};

/// Builds an encoder and a projection head with parameters drawn from `seed`.
pub fn init_encoder(
    config: &EncoderConfig,
    head: &HeadConfig,
    seed: u64,
) -> Result<(TransformerEncoder, ProjectionHead)> {
    let enc = TransformerEncoder::init(config, seed)?;
    let head = ProjectionHead::init(head, config.d_latent, seed)?;
    Ok((enc, head))
}

/// Hash identifying the architecture a checkpoint was trained with.
pub fn model_hash(config: &EncoderConfig, head: &HeadConfig) -> u64 {
    config_hash(&(config, head))
}

pub fn save_model(enc: &TransformerEncoder, head: &ProjectionHead, path: &Path) -> Result<()> {
    let mut tensors = Vec::new();
    for (n, t) in enc.params.names().iter().zip(enc.params.tensors()) {
        tensors.push((format!("enc.{n}"), t.clone()));
    }
    for (n, t) in head.params.names().iter().zip(head.params.tensors()) {
        tensors.push((format!("head.{n}"), t.clone()));
    }
    Checkpoint {
        config_hash: model_hash(&enc.config, &head.config),
        tensors,
    }
    .save(path)
}

/// Loads a checkpoint written by [`save_model`], refusing it unless it was
/// produced with exactly these configurations.
pub fn load_model(
    path: &Path,
    config: &EncoderConfig,
    head: &HeadConfig,
) -> Result<(TransformerEncoder, ProjectionHead)> {
    let ck = Checkpoint::load(path)?;
    ck.expect_hash(model_hash(config, head))?;
    let mut enc = ParamSet::new();
    let mut hp = ParamSet::new();
    for (n, t) in ck.tensors {
        if let Some(rest) = n.strip_prefix("enc.") {
            enc.push(rest, t);
        } else if let Some(rest) = n.strip_prefix("head.") {
            hp.push(rest, t);
        } else {
            return Err(Error::Checkpoint(format!("unexpected tensor `{n}`")));
        }
    }
    Ok((
        TransformerEncoder::from_params(config.clone(), enc)?,
        ProjectionHead::from_params(head.clone(), config.d_latent, hp)?,
    ))
}
