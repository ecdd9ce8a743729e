use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrate::Estimator;
use crate::classify::{FinetuneConfig, HeadTrainConfig};
use crate::contrastive::ContrastiveConfig;
use crate::dataio::{SynthConfig, WindowConfig};
use crate::encoder::{EncoderConfig, HeadConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw datasets written by `generate` and read by later stages.
    pub data_dir: PathBuf,
    /// Every derived artifact.
    pub artifacts: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: PathBuf::from("data"),
            artifacts: PathBuf::from("artifacts"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMode {
    /// P-values from the scored set itself, leaving each account out.
    #[default]
    LeaveOneOut,
    /// P-values from a labeled calibration part of the test split; the rest
    /// is thresholded.
    Heldout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub alpha_high: Vec<f64>,
    pub alpha_low: Vec<f64>,
    pub mode: CalibrationMode,
    pub estimator: Estimator,
    /// Share of the test split used for calibration in held-out mode.
    pub heldout_fraction: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            alpha_high: vec![0.1, 0.2, 0.3],
            alpha_low: vec![0.01, 0.02, 0.05],
            mode: CalibrationMode::LeaveOneOut,
            estimator: Estimator::Strict,
            heldout_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Seeds of the `evaluate` runs summarized by `report`.
    pub seeds: Vec<u64>,
    pub bins: usize,
    pub finetune: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            seeds: (0..10).collect(),
            bins: 20,
            finetune: false,
        }
    }
}

/// Everything a pipeline run needs. Every field has a default, so a
/// configuration file only lists what it changes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Save the model every this many pre-training epochs; 0 disables.
    pub checkpoint_every: usize,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub windows: WindowConfig,
    /// `d_input` is ignored; it always comes from the fitted schema.
    pub encoder: EncoderConfig,
    pub head: HeadConfig,
    pub contrastive: ContrastiveConfig,
    pub logistic: HeadTrainConfig,
    pub finetune: FinetuneConfig,
    pub calibration: CalibrationConfig,
    pub report: ReportConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: PipelineConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.contrastive.validate()?;
        for &a in self.calibration.alpha_high.iter().chain(&self.calibration.alpha_low) {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::invalid(format!("calibration level {a} outside (0, 1]")));
            }
        }
        if !(self.calibration.heldout_fraction > 0.0 && self.calibration.heldout_fraction < 1.0) {
            return Err(Error::invalid("heldout_fraction must lie in (0, 1)"));
        }
        if self.report.bins == 0 {
            return Err(Error::invalid("report bins must be positive"));
        }
        Ok(())
    }

    /// Encoder configuration with the input width of the fitted schema.
    pub fn encoder_for(&self, d_input: usize) -> Result<EncoderConfig> {
        let cfg = EncoderConfig {
            d_input,
            ..self.encoder.clone()
        };
        cfg.validate()?;
        if cfg.max_length < self.windows.max_len {
            return Err(Error::invalid(format!(
                "encoder max_length {} is shorter than the window cap {}",
                cfg.max_length, self.windows.max_len
            )));
        }
        Ok(cfg)
    }

    /// Small models and short training suited to a single machine.
    pub fn desk() -> Self {
        PipelineConfig {
            windows: WindowConfig {
                max_len: 64,
                ..Default::default()
            },
            encoder: EncoderConfig::toy(0),
            contrastive: ContrastiveConfig {
                epochs: 10,
                batch_size: 32,
                grad_accumulation: 2,
                bank_capacity: 1000,
                ..Default::default()
            },
            report: ReportConfig {
                seeds: (0..5).collect(),
                ..Default::default()
            },
            ..Default::default()
        }
    }
}
