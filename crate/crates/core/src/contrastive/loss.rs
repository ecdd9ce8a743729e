use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{NodeId, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Positive included in the denominator; never negative.
    Standard,
    /// Denominator sums over negatives only.
    NegativesOnly,
}

/// Records the InfoNCE loss of `z_ref` (a `[1, d]` node) against a positive
/// and negatives, which enter as constants.
pub fn info_nce_node(
    tape: &mut Tape,
    z_ref: NodeId,
    positive: &[f64],
    negatives: &[Vec<f64>],
    temperature: f64,
    mode: LossMode,
) -> Result<NodeId> {
    if negatives.is_empty() {
        return Err(Error::invalid("InfoNCE needs at least one negative"));
    }
    if !(temperature > 0.0) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mut sims = Vec::with_capacity(negatives.len() + 1);
    for e in std::iter::once(positive).chain(negatives.iter().map(Vec::as_slice)) {
        let c = tape.constant(Tensor::row(e)?);
        sims.push(tape.cosine_sim(z_ref, c)?);
    }
    let logits = tape.concat_cols(sims)?;
    let logits = tape.scale(logits, 1.0 / temperature)?;
    let pos = tape.slice_cols(logits, 0, 1)?;
    let denom = match mode {
        LossMode::Standard => logits,
        LossMode::NegativesOnly => tape.slice_cols(logits, 1, negatives.len())?,
    };
    let lse = tape.logsumexp(denom)?;
    tape.sub(lse, pos)
}

/// InfoNCE loss value.
pub fn info_nce(
    z_ref: &[f64],
    positive: &[f64],
    negatives: &[Vec<f64>],
    temperature: f64,
    mode: LossMode,
) -> Result<f64> {
    let mut tape = Tape::new();
    let z = tape.input("z", Tensor::row(z_ref)?);
    let l = info_nce_node(&mut tape, z, positive, negatives, temperature, mode)?;
    Ok(tape.value(l).item())
}
