use super::config::HeadConfig;
use super::transformer::{glorot, uniform};
use crate::error::{Error, Result};
use crate::numkernel::{NodeId, ParamSet, Tape, Tensor};
use crate::rng::{stream, Stream};

/// Two-layer MLP from `u` to the contrastive space.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionHead {
    pub config: HeadConfig,
    pub d_in: usize,
    pub params: ParamSet,
}

const NAMES: [&str; 4] = ["h1.w", "h1.b", "h2.w", "h2.b"];

impl ProjectionHead {
    pub fn init(config: &HeadConfig, d_in: usize, seed: u64) -> Result<Self> {
        if config.hidden == 0 || config.out == 0 || d_in == 0 {
            return Err(Error::invalid("projection head dimensions must be positive"));
        }
        let mut rng = stream(seed, Stream::Init, &[1]);
        let mut p = ParamSet::new();
        p.push(
            "h1.w",
            uniform(&mut rng, d_in, config.hidden, glorot(d_in, config.hidden)),
        );
        p.push("h1.b", Tensor::zeros(&[1, config.hidden]));
        p.push(
            "h2.w",
            uniform(&mut rng, config.hidden, config.out, glorot(config.hidden, config.out)),
        );
        p.push("h2.b", Tensor::zeros(&[1, config.out]));
        Ok(ProjectionHead {
            config: config.clone(),
            d_in,
            params: p,
        })
    }

    pub fn from_params(config: HeadConfig, d_in: usize, params: ParamSet) -> Result<Self> {
        let shapes = [
            [d_in, config.hidden],
            [1, config.hidden],
            [config.hidden, config.out],
            [1, config.out],
        ];
        for (name, shape) in NAMES.iter().zip(shapes) {
            match params.get(name) {
                Some(t) if t.shape() == shape => {}
                Some(t) => {
                    return Err(Error::Checkpoint(format!(
                        "head parameter `{name}` has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                None => return Err(Error::Checkpoint(format!("head parameter `{name}` missing"))),
            }
        }
        Ok(ProjectionHead { config, d_in, params })
    }

    /// Records `z = W2 relu(W1 u + b1) + b2` for a `[1, d_in]` node.
    pub fn forward(&self, tape: &mut Tape, p: &[NodeId], u: NodeId) -> Result<NodeId> {
        let d = tape.value(u).shape()[1];
        if d != self.d_in {
            return Err(Error::shape(
                "project",
                format!("u has dimension {d}, head expects {}", self.d_in),
            ));
        }
        let h = tape.matmul(u, p[0])?;
        let h = tape.add_row(h, p[1])?;
        let h = tape.relu(h)?;
        let z = tape.matmul(h, p[2])?;
        tape.add_row(z, p[3])
    }

    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = tape.input("u", Tensor::row(u)?);
        let z = self.forward(&mut tape, &p, x)?;
        Ok(tape.value(z).data().to_vec())
    }
}
