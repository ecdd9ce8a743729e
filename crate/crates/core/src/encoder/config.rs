use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positional {
    Learned,
    Disabled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Width of one encoded event; taken from the schema.
    pub d_input: usize,
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    /// Hidden width of the feed-forward blocks.
    pub ff_width: usize,
    pub dropout: f64,
    pub max_length: usize,
    pub d_latent: usize,
    pub positional: Positional,
    pub activation: Activation,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_input: 0,
            layers: 5,
            heads: 8,
            width: 64,
            ff_width: 256,
            dropout: 0.1,
            max_length: 256,
            d_latent: 64,
            positional: Positional::Learned,
            activation: Activation::Gelu,
        }
    }
}

impl EncoderConfig {
    /// Small configuration used for desk-scale experiments.
    pub fn toy(d_input: usize) -> Self {
        EncoderConfig {
            d_input,
            layers: 2,
            heads: 4,
            width: 32,
            ff_width: 64,
            max_length: 64,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_input", self.d_input),
            ("layers", self.layers),
            ("heads", self.heads),
            ("width", self.width),
            ("ff_width", self.ff_width),
            ("max_length", self.max_length),
            ("d_latent", self.d_latent),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("encoder {name} must be positive")));
            }
        }
        if !self.width.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "width {} is not divisible by {} heads",
                self.width, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Scalar parameter count implied by the shapes.
    pub fn param_count(&self) -> usize {
        let (w, f) = (self.width, self.ff_width);
        let pos = match self.positional {
            Positional::Learned => self.max_length * w,
            Positional::Disabled => 0,
        };
        let per_layer = 2 * w + (w * 3 * w + 3 * w) + (w * w + w) + 2 * w + (w * f + f) + (f * w + w);
        self.d_input * w + w + pos + self.layers * per_layer + 2 * w + w * self.d_latent + self.d_latent
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    pub hidden: usize,
    pub out: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig { hidden: 64, out: 16 }
    }
}
