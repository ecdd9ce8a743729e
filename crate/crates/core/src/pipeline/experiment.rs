use rand::seq::SliceRandom;

use super::config::{CalibrationConfig, CalibrationMode, PipelineConfig};
use crate::calibrate::{adjust_alpha_low, decide, pvalues_against, pvalues_with, Side, ThresholdDecision};
use crate::classify::{finetune, score_dataset, tabular_baseline, train_head_frozen, LogisticHead, ScoreSet};
use crate::contrastive::{pretrain, EpochStats, PretrainOutput};
use crate::dataio::{fit_schema, generate_synthetic, EncodingSchema, LabeledDataset, RawDataset, Standardizer};
use crate::encoder::{init_encoder, TransformerEncoder};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Encoded splits with their standardized profiles.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub schema: EncodingSchema,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Fitted on the training profiles.
    pub standardizer: Standardizer,
    pub train_profiles: Vec<Vec<f64>>,
    pub test_profiles: Vec<Vec<f64>>,
}

fn raw_profiles(d: &LabeledDataset) -> Vec<Vec<f64>> {
    d.profiles.iter().map(|p| p.values.clone()).collect()
}

pub fn prepare(cfg: &PipelineConfig, train_raw: &RawDataset, test_raw: &RawDataset) -> Result<Prepared> {
    let schema = fit_schema(train_raw)?;
    let train = LabeledDataset::from_raw(train_raw, &schema, cfg.windows)?;
    let test = LabeledDataset::from_raw(test_raw, &schema, cfg.windows)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data("a split has no account with events".into()));
    }
    let standardizer = Standardizer::fit(&raw_profiles(&train))?;
    let train_profiles = standardizer.apply_all(&raw_profiles(&train))?;
    let test_profiles = standardizer.apply_all(&raw_profiles(&test))?;
    Ok(Prepared {
        schema,
        train,
        test,
        standardizer,
        train_profiles,
        test_profiles,
    })
}

pub fn pretrain_stage(cfg: &PipelineConfig, prep: &Prepared, seed: u64) -> Result<PretrainOutput> {
    let ec = cfg.encoder_for(prep.schema.d_input())?;
    let (enc, head) = init_encoder(&ec, &cfg.head, seed)?;
    pretrain(&prep.train, &prep.train_profiles, enc, head, &cfg.contrastive, seed)
}

/// Logistic head on frozen representations of the training split.
pub fn cr_head(
    cfg: &PipelineConfig,
    encoder: &TransformerEncoder,
    train: &LabeledDataset,
    seed: u64,
) -> Result<LogisticHead> {
    let u = encoder.encode(&train.series, false, 0)?;
    train_head_frozen(&u, &train.labels, &cfg.logistic, seed)
}

pub fn baseline_head(cfg: &PipelineConfig, train: &LabeledDataset, seed: u64) -> Result<LogisticHead> {
    tabular_baseline(&raw_profiles(train), &train.labels, &cfg.logistic, seed)
}

pub fn score_profiles(head: &LogisticHead, data: &LabeledDataset) -> Result<ScoreSet> {
    ScoreSet::new(
        data.series.iter().map(|s| s.account_id.clone()).collect(),
        head.score_all(&raw_profiles(data))?,
        data.labels.clone(),
    )
}

/// Splits `scores` into a calibration part and the remainder.
pub fn heldout_split(scores: &ScoreSet, fraction: f64, seed: u64) -> Result<(ScoreSet, ScoreSet)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.shuffle(&mut stream(seed, Stream::Shuffle, &[u64::MAX]));
    let k = ((scores.len() as f64) * fraction).round() as usize;
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        ScoreSet::new(
            idx.iter().map(|&i| scores.account_ids[i].clone()).collect(),
            idx.iter().map(|&i| scores.scores[i]).collect(),
            idx.iter().map(|&i| scores.labels[i]).collect(),
        )
    };
    Ok((pick(&order[..k])?, pick(&order[k..])?))
}

/// Decisions at every configured level on both sides. Returns them with the
/// score set they index into.
pub fn calibrate_scores(
    cal: &CalibrationConfig,
    scores: &ScoreSet,
    seed: u64,
) -> Result<(Vec<ThresholdDecision>, ScoreSet)> {
    let (reference, target) = match cal.mode {
        CalibrationMode::LeaveOneOut => (None, scores.clone()),
        CalibrationMode::Heldout => {
            let (c, t) = heldout_split(scores, cal.heldout_fraction, seed)?;
            (Some(c), t)
        }
    };
    let pv = |side: Side| match &reference {
        None => pvalues_with(&target, side, cal.estimator),
        Some(c) => pvalues_against(c, &target.scores, side, cal.estimator),
    };
    let ph = pv(Side::High)?;
    let pl = pv(Side::Low)?;
    let labels_for_adjust = reference.as_ref().map_or(&target.labels, |c| &c.labels);
    let mut out = Vec::new();
    for &a in &cal.alpha_high {
        out.push(decide(&ph, &target, a, a, Some(&target.labels))?);
    }
    for &a in &cal.alpha_low {
        let adj = adjust_alpha_low(a, labels_for_adjust)?;
        out.push(decide(&pl, &target, a, adj.value, Some(&target.labels))?);
    }
    Ok((out, target))
}

#[derive(Clone, Debug)]
pub struct ModelRun {
    pub model: String,
    pub scores: ScoreSet,
    pub decisions: Vec<ThresholdDecision>,
    /// The accounts the decisions refer to.
    pub evaluated: ScoreSet,
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub trace: Vec<EpochStats>,
    pub models: Vec<ModelRun>,
}

/// Generates data for `seed`, trains every model and calibrates its test
/// scores.
pub fn run_seed(cfg: &PipelineConfig, seed: u64) -> Result<SeedRun> {
    let (train_raw, test_raw) = generate_synthetic(&cfg.synth, seed)?;
    let prep = prepare(cfg, &train_raw, &test_raw)?;
    let pre = pretrain_stage(cfg, &prep, seed)?;
    let mut models = Vec::new();
    let mut push = |name: &str, scores: ScoreSet| -> Result<()> {
        let (decisions, evaluated) = calibrate_scores(&cfg.calibration, &scores, seed)?;
        models.push(ModelRun {
            model: name.to_string(),
            scores,
            decisions,
            evaluated,
        });
        Ok(())
    };

    let head = cr_head(cfg, &pre.encoder, &prep.train, seed)?;
    push("cr", score_dataset(&pre.encoder, &head, &prep.test)?)?;
    let base = baseline_head(cfg, &prep.train, seed)?;
    push("tabular", score_profiles(&base, &prep.test)?)?;
    if cfg.report.finetune {
        let ft = finetune(
            &prep.train.series,
            &prep.train.labels,
            pre.encoder.clone(),
            &head,
            &cfg.finetune,
            seed,
        )?;
        push("ft", score_dataset(&ft.encoder, &ft.head, &prep.test)?)?;
    }
    Ok(SeedRun {
        seed,
        trace: pre.trace,
        models,
    })
}
