//! Central finite-difference comparison against tape gradients.

use super::params::ParamSet;
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::Result;

/// Denominator floor for the relative error, so that gradients which are
/// zero up to rounding do not produce spurious failures.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Largest elementwise relative error between the tape gradient of the scalar
/// built by `f` and central differences with step `h`, over every input.
pub fn gradcheck<F>(inputs: &[Tensor], h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| tape.input(format!("x{i}"), x.clone()))
            .collect();
        let out = f(&mut tape, &ids)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs
        .iter()
        .enumerate()
        .map(|(i, x)| tape.input(format!("x{i}"), x.clone()))
        .collect();
    let out = f(&mut tape, &ids)?;
    let grads = tape.grad(out)?;

    let mut worst = 0.0f64;
    let mut xs = inputs.to_vec();
    for (k, &id) in ids.iter().enumerate() {
        let g = grads.wrt(id);
        for e in 0..xs[k].len() {
            let orig = xs[k].data()[e];
            xs[k].data_mut()[e] = orig + h;
            let fp = eval(&xs)?;
            xs[k].data_mut()[e] = orig - h;
            let fm = eval(&xs)?;
            xs[k].data_mut()[e] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            worst = worst.max(relative_error(g.data()[e], numeric));
        }
    }
    Ok(worst)
}

/// Like [`gradcheck`] but over the tensors of `params`, bound as `Param`
/// leaves. At most `per_tensor` evenly spaced coordinates of each tensor are
/// perturbed.
pub fn gradcheck_params<F>(params: &ParamSet, h: f64, per_tensor: usize, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let eval = |ps: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let ids = ps.bind(&mut tape);
        let out = f(&mut tape, &ids)?;
        Ok(tape.value(out).item())
    };
    let mut tape = Tape::new();
    let ids = params.bind(&mut tape);
    let out = f(&mut tape, &ids)?;
    let grads = tape.grad(out)?;

    let mut worst = 0.0f64;
    let mut ps = params.clone();
    for (k, &id) in ids.iter().enumerate() {
        let g = grads.wrt(id);
        let n = ps.tensors()[k].len();
        let step = n.div_ceil(per_tensor.max(1)).max(1);
        for e in (0..n).step_by(step) {
            let orig = ps.tensors()[k].data()[e];
            ps.tensors_mut()[k].data_mut()[e] = orig + h;
            let fp = eval(&ps)?;
            ps.tensors_mut()[k].data_mut()[e] = orig - h;
            let fm = eval(&ps)?;
            ps.tensors_mut()[k].data_mut()[e] = orig;
            worst = worst.max(relative_error(g.data()[e], (fp - fm) / (2.0 * h)));
        }
    }
    Ok(worst)
}
