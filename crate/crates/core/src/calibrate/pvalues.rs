use serde::{Deserialize, Serialize};

use crate::classify::ScoreSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Declares fraud above a high threshold; non-frauds are the null.
    High,
    /// Declares non-fraud below a low threshold; frauds are the null.
    Low,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::High => "high",
            Side::Low => "low",
        }
    }

    /// Label of the accounts whose scores form the null distribution.
    pub fn null_label(self) -> u8 {
        match self {
            Side::High => 0,
            Side::Low => 1,
        }
    }
}

/// How a p-value counts the null scores beyond an account.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// `#{other nulls strictly beyond} / #{other nulls}`.
    #[default]
    Strict,
    /// `(1 + #{other nulls at or beyond}) / (1 + #{other nulls})`, which is
    /// super-uniform for a null account.
    Conservative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PValueSet {
    pub side: Side,
    pub values: Vec<f64>,
}

/// Number of entries of the ascending `sorted` strictly greater than `s`.
fn count_above(sorted: &[f64], s: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v <= s)
}

/// Number of entries of the ascending `sorted` strictly less than `s`.
fn count_below(sorted: &[f64], s: f64) -> usize {
    sorted.partition_point(|&v| v < s)
}

fn null_scores(scores: &ScoreSet, side: Side) -> Vec<f64> {
    let mut v: Vec<f64> = scores
        .scores
        .iter()
        .zip(&scores.labels)
        .filter(|(_, &y)| y == side.null_label())
        .map(|(&s, _)| s)
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

fn tail_count(sorted: &[f64], s: f64, side: Side) -> usize {
    match side {
        Side::High => count_above(sorted, s),
        Side::Low => count_below(sorted, s),
    }
}

/// Nulls at or beyond `s`.
fn tail_count_inclusive(sorted: &[f64], s: f64, side: Side) -> usize {
    match side {
        Side::High => sorted.len() - sorted.partition_point(|&v| v < s),
        Side::Low => sorted.partition_point(|&v| v <= s),
    }
}

/// Leave-one-out empirical p-values of every account on `side`.
///
/// High side: the share of the other non-frauds scoring strictly above.
/// Low side: the share of the other frauds scoring strictly below.
pub fn pvalues(scores: &ScoreSet, side: Side) -> Result<PValueSet> {
    pvalues_with(scores, side, Estimator::Strict)
}

pub fn pvalues_with(scores: &ScoreSet, side: Side, estimator: Estimator) -> Result<PValueSet> {
    let null = null_scores(scores, side);
    let mut values = Vec::with_capacity(scores.len());
    for (i, (&s, &y)) in scores.scores.iter().zip(&scores.labels).enumerate() {
        let denom = null.len() - usize::from(y == side.null_label());
        if denom == 0 {
            return Err(Error::Degenerate(format!(
                "account `{}`: no other {} account to estimate its {}-side p-value",
                scores.account_ids[i],
                if side == Side::High { "non-fraud" } else { "fraud" },
                side.as_str()
            )));
        }
        let p = match estimator {
            // an account never lies strictly beyond itself
            Estimator::Strict => tail_count(&null, s, side) as f64 / denom as f64,
            Estimator::Conservative => {
                let beyond = tail_count_inclusive(&null, s, side) - usize::from(y == side.null_label());
                (1 + beyond) as f64 / (1 + denom) as f64
            }
        };
        values.push(p);
    }
    Ok(PValueSet { side, values })
}

pub fn pvalues_high(scores: &ScoreSet) -> Result<PValueSet> {
    pvalues(scores, Side::High)
}

pub fn pvalues_low(scores: &ScoreSet) -> Result<PValueSet> {
    pvalues(scores, Side::Low)
}

/// P-values of `targets` against the null accounts of a separate
/// calibration set.
pub fn pvalues_against(calibration: &ScoreSet, targets: &[f64], side: Side, estimator: Estimator) -> Result<PValueSet> {
    let null = null_scores(calibration, side);
    if null.is_empty() {
        return Err(Error::Degenerate(format!(
            "calibration set has no {} accounts",
            if side == Side::High { "non-fraud" } else { "fraud" }
        )));
    }
    let n = null.len() as f64;
    Ok(PValueSet {
        side,
        values: targets
            .iter()
            .map(|&s| match estimator {
                Estimator::Strict => tail_count(&null, s, side) as f64 / n,
                Estimator::Conservative => (1 + tail_count_inclusive(&null, s, side)) as f64 / (n + 1.0),
            })
            .collect(),
    })
}
