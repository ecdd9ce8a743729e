use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 5e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one ordered list of parameters.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl OptimizerState {
    pub fn new(config: AdamWConfig, params: &[Tensor]) -> Self {
        OptimizerState {
            config,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

fn check_grads(params: &[Tensor], grads: &[Tensor]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape(
            "adamw_step",
            format!("{} parameters, {} gradients", params.len(), grads.len()),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::shape(
                "adamw_step",
                format!("parameter {i}: {:?} vs gradient {:?}", p.shape(), g.shape()),
            ));
        }
        if !g.is_finite() {
            return Err(Error::invalid(format!("gradient {i} is not finite")));
        }
    }
    Ok(())
}

/// One AdamW update with decoupled weight decay.
pub fn adamw_step(params: &mut [Tensor], grads: &[Tensor], state: &mut OptimizerState) -> Result<()> {
    check_grads(params, grads)?;
    if state.m.len() != params.len() {
        return Err(Error::shape(
            "adamw_step",
            format!("state tracks {} tensors, got {}", state.m.len(), params.len()),
        ));
    }
    let c = state.config;
    if !(c.lr >= 0.0) {
        return Err(Error::invalid(format!("learning rate must be >= 0, got {}", c.lr)));
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - c.beta1.powf(t);
    let bc2 = 1.0 - c.beta2.powf(t);
    let decay = 1.0 - c.lr * c.weight_decay;
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if m.shape() != p.shape() {
            return Err(Error::shape(
                "adamw_step",
                format!("moment {:?} vs parameter {:?}", m.shape(), p.shape()),
            ));
        }
        let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
        for i in 0..pd.len() {
            let gi = g.data()[i];
            md[i] = c.beta1 * md[i] + (1.0 - c.beta1) * gi;
            vd[i] = c.beta2 * vd[i] + (1.0 - c.beta2) * gi * gi;
            let mhat = md[i] / bc1;
            let vhat = vd[i] / bc2;
            pd[i] = pd[i] * decay - c.lr * mhat / (vhat.sqrt() + c.eps);
        }
    }
    Ok(())
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::invalid(format!("max_norm must be positive, got {max_norm}")));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("non-finite gradient passed to clipping"));
    }
    let norm = grads.iter().map(Tensor::sum_squares).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.data_mut() {
                *x *= s;
            }
        }
    }
    Ok(norm)
}
