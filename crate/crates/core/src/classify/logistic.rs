use std::f64::consts::PI;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::Standardizer;
use crate::error::{Error, Result};
use crate::numkernel::{adamw_step, AdamWConfig, OptimizerState, Tensor};
use crate::rng::{stream, Stream};

/// Largest double below 1.
const SCORE_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// `sigmoid(w . (x - mean) / std + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticHead {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
    /// Input standardization applied before the linear map.
    pub input: Standardizer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadTrainConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak learning rate, decayed to zero on a cosine schedule.
    pub lr: f64,
    pub standardize: bool,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        HeadTrainConfig {
            lambda: 1e-4,
            epochs: 200,
            batch_size: 512,
            lr: 0.05,
            standardize: true,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticHead {
    pub fn zeros(d: usize, lambda: f64) -> Self {
        LogisticHead {
            w: vec![0.0; d],
            b: 0.0,
            lambda,
            input: Standardizer {
                mean: vec![0.0; d],
                std: vec![1.0; d],
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(Error::shape(
                "score",
                format!("input has dimension {}, head expects {}", x.len(), self.w.len()),
            ));
        }
        let s = self.input.apply(x)?;
        Ok(self.w.iter().zip(&s).map(|(w, v)| w * v).sum::<f64>() + self.b)
    }

    /// Probability of the positive class, kept strictly inside (0, 1).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?).clamp(f64::MIN_POSITIVE, SCORE_MAX))
    }

    pub fn score_all<R: AsRef<[f64]>>(&self, xs: &[R]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.score(x.as_ref())).collect()
    }

    /// The same map with standardization folded into `w` and `b`.
    pub fn folded(&self) -> LogisticHead {
        let w: Vec<f64> = self.w.iter().zip(&self.input.std).map(|(w, s)| w / s).collect();
        let b = self.b - w.iter().zip(&self.input.mean).map(|(w, m)| w * m).sum::<f64>();
        LogisticHead {
            w,
            b,
            ..LogisticHead::zeros(self.w.len(), self.lambda)
        }
    }
}

/// Mean cross-entropy plus `lambda * |w|^2` on already standardized rows,
/// with its gradient `(dw, db)`.
pub fn regularized_loss<R: AsRef<[f64]>>(w: &[f64], b: f64, lambda: f64, xs: &[R], ys: &[u8]) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let x = x.as_ref();
        let z = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
        let y = f64::from(y);
        loss += softplus(z) - y * z;
        let r = (sigmoid(z) - y) / n;
        for (g, v) in gw.iter_mut().zip(x) {
            *g += r * v;
        }
        gb += r;
    }
    loss = loss / n + lambda * w.iter().map(|v| v * v).sum::<f64>();
    for (g, v) in gw.iter_mut().zip(w) {
        *g += 2.0 * lambda * v;
    }
    (loss, gw, gb)
}

pub(crate) fn check_labels(n: usize, labels: &[u8]) -> Result<()> {
    if n != labels.len() {
        return Err(Error::Data(format!("{n} inputs but {} labels", labels.len())));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Data("labels must be 0 or 1".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::Data(
            "classifier training needs at least one example of each class".into(),
        ));
    }
    Ok(())
}

/// Fits a logistic head by mini-batch Adam on the regularized cross-entropy.
pub fn train_head_frozen<R: AsRef<[f64]>>(
    inputs: &[R],
    labels: &[u8],
    cfg: &HeadTrainConfig,
    seed: u64,
) -> Result<LogisticHead> {
    check_labels(inputs.len(), labels)?;
    if !(cfg.lambda >= 0.0) || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::invalid("head training needs lambda >= 0, batch >= 1 and lr > 0"));
    }
    let rows: Vec<Vec<f64>> = inputs.iter().map(|r| r.as_ref().to_vec()).collect();
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::shape("train_head", "rows differ in dimension"));
    }
    let input = if cfg.standardize {
        Standardizer::fit(&rows)?
    } else {
        LogisticHead::zeros(d, 0.0).input
    };
    let xs = input.apply_all(&rows)?;

    let mut params = vec![Tensor::zeros(&[d]), Tensor::zeros(&[1])];
    let mut opt = OptimizerState::new(
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: 0.0,
            ..Default::default()
        },
        &params,
    );
    let n = xs.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total = (cfg.epochs * steps_per_epoch).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream(seed, Stream::Head, &[epoch as u64]));
        for chunk in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, gw, gb) = regularized_loss(params[0].data(), params[1].data()[0], cfg.lambda, &bx, &by);
            opt.config.lr = cfg.lr * 0.5 * (1.0 + (PI * t as f64 / total as f64).cos());
            adamw_step(
                &mut params,
                &[Tensor::new(vec![d], gw)?, Tensor::new(vec![1], vec![gb])?],
                &mut opt,
            )?;
            t += 1;
        }
    }
    Ok(LogisticHead {
        w: params[0].data().to_vec(),
        b: params[1].data()[0],
        lambda: cfg.lambda,
        input,
    })
}

/// Logistic regression on tabular profiles.
pub fn tabular_baseline<R: AsRef<[f64]>>(
    profiles: &[R],
    labels: &[u8],
    cfg: &HeadTrainConfig,
    seed: u64,
) -> Result<LogisticHead> {
    train_head_frozen(profiles, labels, cfg, seed)
}
