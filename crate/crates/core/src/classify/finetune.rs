use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{check_labels, LogisticHead};
use crate::dataio::AccountSeries;
use crate::encoder::TransformerEncoder;
use crate::error::{Error, Result};
use crate::numkernel::{adamw_step, clip_global_norm, AdamWConfig, OptimizerState, Tape, Tensor};
use crate::rng::{stream, Stream};

/// Dropout counter prefix separating fine-tuning draws from pre-training.
const FT_TAG: u64 = 0xF7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub dropout: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 10,
            batch_size: 1024,
            lr: 1e-3,
            weight_decay: 0.01,
            clip_norm: 5.0,
            dropout: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FinetuneOutput {
    pub encoder: TransformerEncoder,
    /// Head with standardization folded into its weights.
    pub head: LogisticHead,
    /// Mean batch cross-entropy before each update.
    pub step_losses: Vec<f64>,
}

/// Joint cross-entropy training of the encoder and a logistic head on `u`.
pub fn finetune(
    series: &[AccountSeries],
    labels: &[u8],
    mut encoder: TransformerEncoder,
    head: &LogisticHead,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<FinetuneOutput> {
    check_labels(series.len(), labels)?;
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::invalid("fine-tuning needs batch >= 1 and lr > 0"));
    }
    let d = encoder.config.d_latent;
    if head.dim() != d {
        return Err(Error::shape(
            "finetune",
            format!("head has dimension {}, encoder emits {d}", head.dim()),
        ));
    }
    let head = head.folded();
    let n_enc = encoder.params.len();
    let mut params: Vec<Tensor> = encoder.params.tensors().to_vec();
    params.push(Tensor::new(vec![d, 1], head.w.clone())?);
    params.push(Tensor::new(vec![1, 1], vec![head.b])?);
    let mut opt = OptimizerState::new(
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..Default::default()
        },
        &params,
    );

    let n = series.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut step_losses = Vec::new();
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream(seed, Stream::Shuffle, &[FT_TAG, epoch as u64]));
        for chunk in order.chunks(cfg.batch_size) {
            let per: Vec<(f64, Vec<Tensor>)> = chunk
                .par_iter()
                .enumerate()
                .map(|(pos, &i)| {
                    let mut tape = Tape::new();
                    let ids: Vec<_> = params
                        .iter()
                        .enumerate()
                        .map(|(k, t)| tape.param(format!("p{k}"), t.clone()))
                        .collect();
                    let mut rng = stream(seed, Stream::Dropout, &[FT_TAG, step, pos as u64]);
                    let drop = cfg.dropout.then_some(&mut rng);
                    let s = &series[i];
                    let u = encoder.forward(&mut tape, &ids[..n_enc], &s.encoded, &s.mask, drop)?;
                    let z = tape.matmul(u, ids[n_enc])?;
                    let z = tape.add(z, ids[n_enc + 1])?;
                    let l = tape.bce_with_logits(z, Tensor::new(vec![1, 1], vec![f64::from(labels[i])])?)?;
                    let mut g = tape.grad(l)?;
                    Ok((tape.value(l).item(), ids.iter().map(|&id| g.take(id)).collect()))
                })
                .collect::<Result<_>>()?;
            let m = chunk.len() as f64;
            step_losses.push(per.iter().map(|(l, _)| l).sum::<f64>() / m);
            let mut grads: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
            for (_, g) in &per {
                for (acc, t) in grads.iter_mut().zip(g) {
                    for (a, v) in acc.iter_mut().zip(t.data()) {
                        *a += v / m;
                    }
                }
            }
            let mut grads: Vec<Tensor> = grads
                .into_iter()
                .zip(&params)
                .map(|(g, p)| Tensor::new(p.shape().to_vec(), g))
                .collect::<Result<_>>()?;
            clip_global_norm(&mut grads, cfg.clip_norm)?;
            adamw_step(&mut params, &grads, &mut opt)?;
            step += 1;
        }
        log::info!(
            "fine-tune epoch {}: loss {:.6}",
            epoch + 1,
            step_losses.last().copied().unwrap_or(f64::NAN)
        );
    }
    encoder.params.tensors_mut().clone_from_slice(&params[..n_enc]);
    let head = LogisticHead {
        w: params[n_enc].data().to_vec(),
        b: params[n_enc + 1].data()[0],
        ..head
    };
    Ok(FinetuneOutput {
        encoder,
        head,
        step_losses,
    })
}
