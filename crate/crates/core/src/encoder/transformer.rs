use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Activation, EncoderConfig, Positional};
use crate::dataio::AccountSeries;
use crate::error::{Error, Result};
use crate::numkernel::{NodeId, ParamSet, Tape, Tensor};
use crate::rng::{stream, Stream};

const LN_EPS: f64 = 1e-5;
const MASKED: f64 = -1e9;

#[derive(Clone, Debug, PartialEq)]
struct LayerIdx {
    ln1_g: usize,
    ln1_b: usize,
    qkv_w: usize,
    qkv_b: usize,
    o_w: usize,
    o_b: usize,
    ln2_g: usize,
    ln2_b: usize,
    ff1_w: usize,
    ff1_b: usize,
    ff2_w: usize,
    ff2_b: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Layout {
    in_w: usize,
    in_b: usize,
    pos: Option<usize>,
    layers: Vec<LayerIdx>,
    lnf_g: usize,
    lnf_b: usize,
    out_w: usize,
    out_b: usize,
}

/// Pre-norm transformer encoder pooled to one vector per series.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformerEncoder {
    pub config: EncoderConfig,
    pub params: ParamSet,
    layout: Layout,
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect(),
    )
    .expect("finite init")
}

/// Glorot-style uniform bound for a `fan_in x fan_out` weight.
pub(crate) fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Dropout mask with inverted scaling.
fn dropout_mask(rng: &mut ChaCha8Rng, shape: &[usize], p: f64) -> Tensor {
    let keep = 1.0 / (1.0 - p);
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect(),
    )
    .expect("finite mask")
}

impl TransformerEncoder {
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, Stream::Init, &[0]);
        let (d, w, f) = (config.d_input, config.width, config.ff_width);
        let mut p = ParamSet::new();
        let zeros = |c: usize| Tensor::zeros(&[1, c]);
        let ones = |c: usize| Tensor::filled(&[1, c], 1.0);
        p.push("in.w", uniform(&mut rng, d, w, glorot(d, w)));
        p.push("in.b", zeros(w));
        if config.positional == Positional::Learned {
            p.push("pos", uniform(&mut rng, config.max_length, w, 0.02 * 3f64.sqrt()));
        }
        for l in 0..config.layers {
            p.push(format!("l{l}.ln1.g"), ones(w));
            p.push(format!("l{l}.ln1.b"), zeros(w));
            p.push(format!("l{l}.qkv.w"), uniform(&mut rng, w, 3 * w, glorot(w, w)));
            p.push(format!("l{l}.qkv.b"), zeros(3 * w));
            p.push(format!("l{l}.o.w"), uniform(&mut rng, w, w, glorot(w, w)));
            p.push(format!("l{l}.o.b"), zeros(w));
            p.push(format!("l{l}.ln2.g"), ones(w));
            p.push(format!("l{l}.ln2.b"), zeros(w));
            p.push(format!("l{l}.ff1.w"), uniform(&mut rng, w, f, glorot(w, f)));
            p.push(format!("l{l}.ff1.b"), zeros(f));
            p.push(format!("l{l}.ff2.w"), uniform(&mut rng, f, w, glorot(f, w)));
            p.push(format!("l{l}.ff2.b"), zeros(w));
        }
        p.push("lnf.g", ones(w));
        p.push("lnf.b", zeros(w));
        p.push(
            "out.w",
            uniform(&mut rng, w, config.d_latent, glorot(w, config.d_latent)),
        );
        p.push("out.b", zeros(config.d_latent));
        Self::from_params(config.clone(), p)
    }

    /// Wraps an existing parameter set, checking names and shapes.
    pub fn from_params(config: EncoderConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let (d, w, f) = (config.d_input, config.width, config.ff_width);
        let find = |name: &str, shape: [usize; 2]| -> Result<usize> {
            let i = params
                .index_of(name)
                .ok_or_else(|| Error::Checkpoint(format!("encoder parameter `{name}` missing")))?;
            if params.tensors()[i].shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "encoder parameter `{name}` has shape {:?}, expected {shape:?}",
                    params.tensors()[i].shape()
                )));
            }
            Ok(i)
        };
        let layers = (0..config.layers)
            .map(|l| {
                Ok(LayerIdx {
                    ln1_g: find(&format!("l{l}.ln1.g"), [1, w])?,
                    ln1_b: find(&format!("l{l}.ln1.b"), [1, w])?,
                    qkv_w: find(&format!("l{l}.qkv.w"), [w, 3 * w])?,
                    qkv_b: find(&format!("l{l}.qkv.b"), [1, 3 * w])?,
                    o_w: find(&format!("l{l}.o.w"), [w, w])?,
                    o_b: find(&format!("l{l}.o.b"), [1, w])?,
                    ln2_g: find(&format!("l{l}.ln2.g"), [1, w])?,
                    ln2_b: find(&format!("l{l}.ln2.b"), [1, w])?,
                    ff1_w: find(&format!("l{l}.ff1.w"), [w, f])?,
                    ff1_b: find(&format!("l{l}.ff1.b"), [1, f])?,
                    ff2_w: find(&format!("l{l}.ff2.w"), [f, w])?,
                    ff2_b: find(&format!("l{l}.ff2.b"), [1, w])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let layout = Layout {
            in_w: find("in.w", [d, w])?,
            in_b: find("in.b", [1, w])?,
            pos: match config.positional {
                Positional::Learned => Some(find("pos", [config.max_length, w])?),
                Positional::Disabled => None,
            },
            layers,
            lnf_g: find("lnf.g", [1, w])?,
            lnf_b: find("lnf.b", [1, w])?,
            out_w: find("out.w", [w, config.d_latent])?,
            out_b: find("out.b", [1, config.d_latent])?,
        };
        Ok(TransformerEncoder { config, params, layout })
    }

    fn check_input(&self, x: &Tensor, mask: &[bool]) -> Result<()> {
        let (t, d) = x.dims2()?;
        if d != self.config.d_input {
            return Err(Error::shape(
                "encode",
                format!("events have {d} features, encoder expects {}", self.config.d_input),
            ));
        }
        if t != mask.len() {
            return Err(Error::shape(
                "encode",
                format!("{t} rows but mask of length {}", mask.len()),
            ));
        }
        if t > self.config.max_length {
            return Err(Error::invalid(format!(
                "series length {t} exceeds max_length {}",
                self.config.max_length
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::invalid("series has no unmasked position"));
        }
        Ok(())
    }

    fn dropout(&self, tape: &mut Tape, x: NodeId, rng: &mut Option<&mut ChaCha8Rng>) -> Result<NodeId> {
        match rng {
            Some(r) if self.config.dropout > 0.0 => {
                let m = dropout_mask(r, tape.value(x).shape(), self.config.dropout);
                tape.mul_const(x, m)
            }
            _ => Ok(x),
        }
    }

    /// Records the forward pass of one series; returns the `[1, d_latent]` node.
    ///
    /// `p` are this encoder's parameters as bound by [`ParamSet::bind`].
    /// Dropout is applied when `dropout_rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &[NodeId],
        x: &Tensor,
        mask: &[bool],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<NodeId> {
        self.check_input(x, mask)?;
        let lo = &self.layout;
        let cfg = &self.config;
        let t = mask.len();
        let dh = cfg.width / cfg.heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let xin = tape.constant(x.clone());
        let mut h = tape.matmul(xin, p[lo.in_w])?;
        h = tape.add_row(h, p[lo.in_b])?;
        if let Some(pos) = lo.pos {
            let rows = tape.gather(p[pos], (0..t).collect())?;
            h = tape.add(h, rows)?;
        }
        h = self.dropout(tape, h, &mut dropout_rng)?;

        let key_mask = Tensor::new(
            vec![t, t],
            (0..t * t).map(|k| if mask[k % t] { 0.0 } else { MASKED }).collect(),
        )?;
        for l in &lo.layers {
            let a = tape.layer_norm_rows(h, p[l.ln1_g], p[l.ln1_b], LN_EPS)?;
            let qkv = tape.matmul(a, p[l.qkv_w])?;
            let qkv = tape.add_row(qkv, p[l.qkv_b])?;
            let mut heads = Vec::with_capacity(cfg.heads);
            for hd in 0..cfg.heads {
                let q = tape.slice_cols(qkv, hd * dh, dh)?;
                let k = tape.slice_cols(qkv, cfg.width + hd * dh, dh)?;
                let v = tape.slice_cols(qkv, 2 * cfg.width + hd * dh, dh)?;
                let kt = tape.transpose(k)?;
                let s = tape.matmul(q, kt)?;
                let s = tape.scale(s, scale)?;
                let s = tape.add_const(s, key_mask.clone())?;
                let att = tape.softmax_rows(s)?;
                heads.push(tape.matmul(att, v)?);
            }
            let cat = if heads.len() == 1 {
                heads[0]
            } else {
                tape.concat_cols(heads)?
            };
            let o = tape.matmul(cat, p[l.o_w])?;
            let o = tape.add_row(o, p[l.o_b])?;
            let o = self.dropout(tape, o, &mut dropout_rng)?;
            h = tape.add(h, o)?;

            let b = tape.layer_norm_rows(h, p[l.ln2_g], p[l.ln2_b], LN_EPS)?;
            let f = tape.matmul(b, p[l.ff1_w])?;
            let f = tape.add_row(f, p[l.ff1_b])?;
            let f = match cfg.activation {
                Activation::Gelu => tape.gelu(f)?,
                Activation::Relu => tape.relu(f)?,
            };
            let f = tape.matmul(f, p[l.ff2_w])?;
            let f = tape.add_row(f, p[l.ff2_b])?;
            let f = self.dropout(tape, f, &mut dropout_rng)?;
            h = tape.add(h, f)?;
        }
        let h = tape.layer_norm_rows(h, p[lo.lnf_g], p[lo.lnf_b], LN_EPS)?;
        let pooled = tape.masked_mean_rows(h, mask.to_vec())?;
        let u = tape.matmul(pooled, p[lo.out_w])?;
        tape.add_row(u, p[lo.out_b])
    }

    /// Representation `u` of one series in evaluation mode.
    pub fn encode_one(&self, x: &Tensor, mask: &[bool]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let u = self.forward(&mut tape, &p, x, mask, None)?;
        Ok(tape.value(u).data().to_vec())
    }

    /// Representations of a batch. In train mode dropout draws from a stream
    /// keyed by `seed` and the series position.
    pub fn encode(&self, batch: &[AccountSeries], train_mode: bool, seed: u64) -> Result<Vec<Vec<f64>>> {
        batch
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut tape = Tape::new();
                let p = self.params.bind(&mut tape);
                let mut rng = stream(seed, Stream::Dropout, &[u64::MAX, i as u64]);
                let u = self.forward(&mut tape, &p, &s.encoded, &s.mask, train_mode.then_some(&mut rng))?;
                Ok(tape.value(u).data().to_vec())
            })
            .collect()
    }
}
