use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pvalues::{pvalues_against, pvalues_with, Estimator, PValueSet, Side};
use crate::classify::ScoreSet;
use crate::error::{Error, Result};

/// Largest `i` (1-based) with `p_(i) <= i * level / N`, or `None` when no
/// sorted p-value crosses the line.
pub fn bh_index(pvalues: &[f64], level: f64) -> Result<Option<usize>> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid(format!("level {level} outside (0, 1]")));
    }
    let mut p = pvalues.to_vec();
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    Ok((1..=p.len()).rev().find(|&i| p[i - 1] <= i as f64 * level / n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustedLevel {
    pub value: f64,
    pub capped: bool,
}

/// `N / (number of frauds) * alpha`, capped at 1.
pub fn adjust_alpha_low(alpha: f64, labels: &[u8]) -> Result<AdjustedLevel> {
    adjust_alpha_ratio(alpha, labels.len(), labels.iter().filter(|&&y| y == 1).count())
}

pub(crate) fn adjust_alpha_ratio(alpha: f64, n: usize, frauds: usize) -> Result<AdjustedLevel> {
    if frauds == 0 {
        return Err(Error::Degenerate(
            "the low-side level correction needs at least one fraud".into(),
        ));
    }
    let raw = n as f64 / frauds as f64 * alpha;
    if raw > 1.0 {
        log::warn!("corrected low-side level {raw} exceeds 1; capped at 1");
        return Ok(AdjustedLevel {
            value: 1.0,
            capped: true,
        });
    }
    Ok(AdjustedLevel {
        value: raw,
        capped: false,
    })
}

/// Outcome of one side of the two-threshold procedure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDecision {
    pub side: Side,
    pub level: f64,
    /// Level actually handed to BH on the low side.
    pub adjusted_level: Option<f64>,
    pub bh_index: Option<usize>,
    pub threshold: Option<f64>,
    /// Positions in the score set, in rank order.
    pub rejected: Vec<usize>,
    pub rejected_ids: Vec<String>,
    pub realized_fdp: Option<f64>,
}

impl ThresholdDecision {
    pub fn rejections(&self) -> usize {
        self.rejected.len()
    }

    /// Rejected accounts whose label is the side's null label.
    pub fn false_discoveries(&self, labels: &[u8]) -> usize {
        self.rejected
            .iter()
            .filter(|&&i| labels[i] == self.side.null_label())
            .count()
    }
}

/// Rank order on one side: p-value ascending, then the most extreme score.
fn ranked(p: &PValueSet, scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        p.values[a].total_cmp(&p.values[b]).then_with(|| match p.side {
            Side::High => scores[b].total_cmp(&scores[a]),
            Side::Low => scores[a].total_cmp(&scores[b]),
        })
    });
    order
}

/// Applies BH at `bh_level` to the p-values of `scores` and records the
/// decision. `labels` fill in the realized proportion when given.
pub fn decide(
    p: &PValueSet,
    scores: &ScoreSet,
    level: f64,
    bh_level: f64,
    labels: Option<&[u8]>,
) -> Result<ThresholdDecision> {
    if p.values.len() != scores.len() {
        return Err(Error::Data("p-values and scores differ in length".into()));
    }
    let idx = bh_index(&p.values, bh_level)?;
    let order = ranked(p, &scores.scores);
    let rejected: Vec<usize> = order[..idx.unwrap_or(0)].to_vec();
    let threshold = idx.map(|i| scores.scores[order[i - 1]]);
    let mut d = ThresholdDecision {
        side: p.side,
        level,
        adjusted_level: (p.side == Side::Low).then_some(bh_level),
        bh_index: idx,
        threshold,
        rejected_ids: rejected.iter().map(|&i| scores.account_ids[i].clone()).collect(),
        rejected,
        realized_fdp: None,
    };
    if let Some(y) = labels {
        d.realized_fdp = Some(realized_fdp(&d, y)?);
    }
    Ok(d)
}

/// False rejections over `max(1, rejections)`.
pub fn realized_fdp(decision: &ThresholdDecision, labels: &[u8]) -> Result<f64> {
    if let Some(&i) = decision.rejected.iter().find(|&&i| i >= labels.len()) {
        return Err(Error::Data(format!("rejected position {i} has no label")));
    }
    Ok(decision.false_discoveries(labels) as f64 / decision.rejections().max(1) as f64)
}

/// Both thresholds with leave-one-out p-values on the same labeled set.
/// The low side runs at the corrected level.
pub fn thresholds(scores: &ScoreSet, alpha_h: f64, alpha_l: f64) -> Result<(ThresholdDecision, ThresholdDecision)> {
    thresholds_with(scores, alpha_h, alpha_l, Estimator::Strict)
}

pub fn thresholds_with(
    scores: &ScoreSet,
    alpha_h: f64,
    alpha_l: f64,
    estimator: Estimator,
) -> Result<(ThresholdDecision, ThresholdDecision)> {
    let ph = pvalues_with(scores, Side::High, estimator)?;
    let pl = pvalues_with(scores, Side::Low, estimator)?;
    let adj = adjust_alpha_low(alpha_l, &scores.labels)?;
    let high = decide(&ph, scores, alpha_h, alpha_h, Some(&scores.labels))?;
    let low = decide(&pl, scores, alpha_l, adj.value, Some(&scores.labels))?;
    Ok((high, low))
}

/// Both thresholds for `test` with p-values and the fraud share taken from a
/// separate labeled `calibration` set. Realized proportions use the test
/// labels.
pub fn thresholds_heldout(
    calibration: &ScoreSet,
    test: &ScoreSet,
    alpha_h: f64,
    alpha_l: f64,
    estimator: Estimator,
) -> Result<(ThresholdDecision, ThresholdDecision)> {
    let ph = pvalues_against(calibration, &test.scores, Side::High, estimator)?;
    let pl = pvalues_against(calibration, &test.scores, Side::Low, estimator)?;
    let adj = adjust_alpha_ratio(alpha_l, calibration.len(), calibration.fraud_count())?;
    let high = decide(&ph, test, alpha_h, alpha_h, Some(&test.labels))?;
    let low = decide(&pl, test, alpha_l, adj.value, Some(&test.labels))?;
    Ok((high, low))
}

fn na<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub const DECISION_HEADER: &str =
    "side\talpha\talpha_adj\tbh_index\tthreshold\trejections\tfalse_discoveries\trealized_fdp";

/// One tab-separated line per decision; absent values print as `NA`.
pub fn decision_row(d: &ThresholdDecision, labels: Option<&[u8]>) -> String {
    let fd = labels.map(|y| d.false_discoveries(y));
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        d.side.as_str(),
        d.level,
        na(d.adjusted_level),
        na(d.bh_index),
        na(d.threshold.map(|t| format!("{t:.17e}"))),
        d.rejections(),
        na(fd),
        na(d.realized_fdp),
    )
}

pub fn write_decisions(path: &Path, decisions: &[ThresholdDecision], labels: Option<&[u8]>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{DECISION_HEADER}")?;
    for d in decisions {
        writeln!(out, "{}", decision_row(d, labels))?;
    }
    out.flush()?;
    Ok(())
}
