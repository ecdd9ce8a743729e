use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bank::MemoryBank;
use super::loss::{info_nce_node, LossMode};
use super::sampling::{perturb, sample_negatives, sample_positive};
use crate::dataio::LabeledDataset;
use crate::encoder::{ProjectionHead, TransformerEncoder};
use crate::error::{Error, Result};
use crate::numkernel::{adamw_step, clip_global_norm, AdamWConfig, OptimizerState, Tape, Tensor};
use crate::rng::{stream, Stream};
use crate::similarity::{select_k, ClusterModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastiveConfig {
    pub temperature: f64,
    pub negatives: usize,
    pub positive_neighbors: usize,
    pub noise_sigma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub grad_accumulation: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub bank_capacity: usize,
    pub mode: LossMode,
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans_iters: usize,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            temperature: 0.2,
            negatives: 128,
            positive_neighbors: 50,
            noise_sigma: 0.05,
            epochs: 100,
            batch_size: 512,
            grad_accumulation: 8,
            lr: 5e-4,
            weight_decay: 0.01,
            clip_norm: 5.0,
            bank_capacity: 4000,
            mode: LossMode::Standard,
            k_min: 2,
            k_max: 8,
            kmeans_iters: 100,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be >= 0"));
        }
        if self.negatives == 0 || self.positive_neighbors == 0 {
            return Err(Error::invalid("negatives and positive neighbors must be >= 1"));
        }
        if self.batch_size == 0 || self.grad_accumulation == 0 || self.bank_capacity == 0 {
            return Err(Error::invalid(
                "batch size, accumulation and bank capacity must be >= 1",
            ));
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(Error::invalid("cluster range must satisfy 2 <= k_min <= k_max"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean InfoNCE over references that found a positive, before the
    /// shortfall weight.
    pub mean_loss: f64,
    pub bank_occupancy: usize,
    pub shortfalls: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct PretrainOutput {
    pub encoder: TransformerEncoder,
    pub head: ProjectionHead,
    pub cluster: ClusterModel,
    pub trace: Vec<EpochStats>,
}

struct RefOutcome {
    loss: f64,
    grads: Vec<Tensor>,
    shortfall: bool,
}

/// Contrastive pre-training over `data`, whose standardized profiles are
/// `profiles` (same order).
///
/// Every epoch visits the accounts in a seeded shuffle. For each micro-batch
/// the references are encoded and projected, the bank receives the batch,
/// and each reference draws one positive (profile neighbours among other
/// accounts) and negatives (other clusters), both perturbed with Gaussian
/// noise. Bank entries are constants; only the reference carries gradient.
/// Parameters are updated every `grad_accumulation` micro-batches and at the
/// end of every epoch.
pub fn pretrain(
    data: &LabeledDataset,
    profiles: &[Vec<f64>],
    encoder: TransformerEncoder,
    head: ProjectionHead,
    cfg: &ContrastiveConfig,
    seed: u64,
) -> Result<PretrainOutput> {
    pretrain_with(data, profiles, encoder, head, cfg, seed, |_, _, _| Ok(()))
}

/// [`pretrain`] with a callback after each epoch.
pub fn pretrain_with<F>(
    data: &LabeledDataset,
    profiles: &[Vec<f64>],
    mut encoder: TransformerEncoder,
    mut head: ProjectionHead,
    cfg: &ContrastiveConfig,
    seed: u64,
    mut on_epoch: F,
) -> Result<PretrainOutput>
where
    F: FnMut(&EpochStats, &TransformerEncoder, &ProjectionHead) -> Result<()>,
{
    cfg.validate()?;
    data.check_alignment()?;
    let n = data.len();
    if profiles.len() != n {
        return Err(Error::Data(format!("{} profiles for {n} series", profiles.len())));
    }
    if n < 2 {
        return Err(Error::Data("pre-training needs at least two accounts".into()));
    }
    let k_max = cfg.k_max.min(n);
    let (k, fit) = select_k(profiles, cfg.k_min.min(k_max)..=k_max, seed, cfg.kmeans_iters)?;
    log::info!("profile clusters: k = {k}");
    let clusters = fit.labels.clone();
    let cluster = fit.model;

    let n_enc = encoder.params.len();
    let mut params: Vec<Tensor> = encoder
        .params
        .tensors()
        .iter()
        .chain(head.params.tensors())
        .cloned()
        .collect();
    let mut opt = OptimizerState::new(
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..Default::default()
        },
        &params,
    );
    let mut bank = MemoryBank::new(cfg.bank_capacity)?;
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut accum: Option<Vec<Tensor>> = None;
    let mut accum_count = 0usize;
    let mut step = 0u64;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(seed, Stream::Shuffle, &[epoch as u64]));
        let (mut loss_sum, mut used, mut shortfalls, mut skipped) = (0.0, 0usize, 0usize, 0usize);

        for batch in order.chunks(cfg.batch_size) {
            let e = epoch as u64;
            let forwards = batch
                .par_iter()
                .enumerate()
                .map(|(pos, &acc)| {
                    let mut tape = Tape::new();
                    let ids = encoder.params.bind(&mut tape);
                    let hids = head.params.bind(&mut tape);
                    let mut drop = stream(seed, Stream::Dropout, &[e, step, pos as u64]);
                    let s = &data.series[acc];
                    let u = encoder.forward(&mut tape, &ids, &s.encoded, &s.mask, Some(&mut drop))?;
                    let z = head.forward(&mut tape, &hids, u)?;
                    Ok((tape, ids.into_iter().chain(hids).collect::<Vec<_>>(), z))
                })
                .collect::<Result<Vec<_>>>()?;
            bank.update(
                forwards
                    .iter()
                    .zip(batch)
                    .map(|((tape, _, z), &acc)| (tape.value(*z).data().to_vec(), acc)),
            );

            let outcomes = forwards
                .into_par_iter()
                .zip(batch.par_iter())
                .enumerate()
                .map(|(pos, ((mut tape, ids, z), &acc))| -> Result<Option<RefOutcome>> {
                    let counters = [e, step, pos as u64];
                    let mut rng = stream(seed, Stream::Sampling, &counters);
                    let Some(p) = sample_positive(&bank, acc, profiles, cfg.positive_neighbors, &mut rng)? else {
                        return Ok(None);
                    };
                    let neg = sample_negatives(&bank, clusters[acc], &clusters, cfg.negatives, &mut rng);
                    if neg.entries.is_empty() {
                        return Ok(None);
                    }
                    let mut examples: Vec<Vec<f64>> = std::iter::once(p)
                        .chain(neg.entries.iter().copied())
                        .map(|i| bank.get(i).z.clone())
                        .collect();
                    perturb(
                        &mut examples,
                        cfg.noise_sigma,
                        &mut stream(seed, Stream::Noise, &counters),
                    )?;
                    let weight = neg.entries.len() as f64 / cfg.negatives as f64;
                    let raw = info_nce_node(&mut tape, z, &examples[0], &examples[1..], cfg.temperature, cfg.mode)?;
                    let l = tape.scale(raw, weight)?;
                    let mut g = tape.grad(l)?;
                    Ok(Some(RefOutcome {
                        loss: tape.value(raw).item(),
                        grads: ids.iter().map(|&id| g.take(id)).collect(),
                        shortfall: neg.shortfall,
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            step += 1;

            let mut batch_grads: Option<Vec<Tensor>> = None;
            let mut contributing = 0usize;
            for o in outcomes {
                let Some(o) = o else {
                    skipped += 1;
                    continue;
                };
                loss_sum += o.loss;
                used += 1;
                contributing += 1;
                shortfalls += usize::from(o.shortfall);
                add_into(&mut batch_grads, o.grads);
            }
            if let Some(mut g) = batch_grads {
                scale_all(&mut g, 1.0 / contributing as f64);
                add_into(&mut accum, g);
                accum_count += 1;
            }
            if accum_count == cfg.grad_accumulation {
                apply(&mut params, &mut accum, &mut accum_count, &mut opt, cfg.clip_norm)?;
                write_back(&mut encoder, &mut head, &params, n_enc);
            }
        }
        if accum_count > 0 {
            apply(&mut params, &mut accum, &mut accum_count, &mut opt, cfg.clip_norm)?;
        }
        if epoch == 0 && used == 0 {
            return Err(Error::Training(
                "no reference found an eligible positive during the first epoch; \
                 the bank must hold entries from at least two accounts"
                    .into(),
            ));
        }
        write_back(&mut encoder, &mut head, &params, n_enc);
        let stats = EpochStats {
            epoch: epoch + 1,
            mean_loss: if used > 0 { loss_sum / used as f64 } else { f64::NAN },
            bank_occupancy: bank.len(),
            shortfalls,
            skipped,
        };
        log::info!(
            "epoch {}: loss {:.6} bank {} shortfalls {} skipped {}",
            stats.epoch,
            stats.mean_loss,
            stats.bank_occupancy,
            stats.shortfalls,
            stats.skipped
        );
        on_epoch(&stats, &encoder, &head)?;
        trace.push(stats);
    }
    Ok(PretrainOutput {
        encoder,
        head,
        cluster,
        trace,
    })
}

fn add_into(acc: &mut Option<Vec<Tensor>>, g: Vec<Tensor>) {
    match acc {
        None => *acc = Some(g),
        Some(a) => {
            for (x, y) in a.iter_mut().zip(&g) {
                *x = Tensor::new(
                    x.shape().to_vec(),
                    x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect(),
                )
                .expect("finite sum");
            }
        }
    }
}

fn scale_all(g: &mut [Tensor], s: f64) {
    for t in g.iter_mut() {
        *t = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v * s).collect()).expect("finite");
    }
}

fn apply(
    params: &mut [Tensor],
    accum: &mut Option<Vec<Tensor>>,
    count: &mut usize,
    opt: &mut OptimizerState,
    clip: f64,
) -> Result<()> {
    let mut g = accum.take().expect("gradients accumulated");
    scale_all(&mut g, 1.0 / *count as f64);
    clip_global_norm(&mut g, clip)?;
    adamw_step(params, &g, opt)?;
    *count = 0;
    Ok(())
}

fn write_back(enc: &mut TransformerEncoder, head: &mut ProjectionHead, params: &[Tensor], n_enc: usize) {
    enc.params.tensors_mut().clone_from_slice(&params[..n_enc]);
    head.params.tensors_mut().clone_from_slice(&params[n_enc..]);
}
