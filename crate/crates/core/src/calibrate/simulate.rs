use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bh::{adjust_alpha_low, decide};
use super::pvalues::{pvalues_with, Estimator, Side};
use crate::classify::ScoreSet;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdrSimulation {
    pub side: Side,
    pub level: f64,
    pub reps: usize,
    pub mean_fdp: f64,
    /// 95% normal-approximation half-width of `mean_fdp`.
    pub half_width: f64,
    pub mean_rejections: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationSpec {
    pub n: usize,
    /// Fraud share; `round(n * pi1)` accounts are frauds.
    pub pi1: f64,
    pub level: f64,
    pub side: Side,
    pub reps: usize,
    pub estimator: Estimator,
}

/// Draws `reps` labeled score sets (non-frauds from `nonfraud`, frauds from
/// `fraud`), runs p-values, BH and the threshold decision on each, and
/// averages the realized false-discovery proportion. Replication `r` draws
/// from its own stream, so results do not depend on scheduling.
pub fn simulate_fdr<N, F>(nonfraud: &N, fraud: &F, spec: SimulationSpec, seed: u64) -> Result<FdrSimulation>
where
    N: Distribution<f64> + Sync,
    F: Distribution<f64> + Sync,
{
    if spec.reps < 100 {
        return Err(Error::invalid(format!(
            "simulate_fdr needs at least 100 replications, got {}",
            spec.reps
        )));
    }
    if !(0.0..=1.0).contains(&spec.pi1) {
        return Err(Error::invalid("pi1 must lie in [0, 1]"));
    }
    let n_fraud = (spec.n as f64 * spec.pi1).round() as usize;
    let results: Vec<(f64, usize)> = (0..spec.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Stream::Simulate, &[r as u64]);
            let labels: Vec<u8> = (0..spec.n).map(|i| u8::from(i < n_fraud)).collect();
            let scores: Vec<f64> = labels
                .iter()
                .map(|&y| {
                    let s = if y == 1 {
                        fraud.sample(&mut rng)
                    } else {
                        nonfraud.sample(&mut rng)
                    };
                    s.clamp(0.0, 1.0)
                })
                .collect();
            let set = ScoreSet::new((0..spec.n).map(|i| i.to_string()).collect(), scores, labels)?;
            let p = pvalues_with(&set, spec.side, spec.estimator)?;
            let bh_level = match spec.side {
                Side::High => spec.level,
                Side::Low => adjust_alpha_low(spec.level, &set.labels)?.value,
            };
            let d = decide(&p, &set, spec.level, bh_level, Some(&set.labels))?;
            Ok((d.realized_fdp.expect("labels given"), d.rejections()))
        })
        .collect::<Result<_>>()?;
    let m = results.len() as f64;
    let mean = results.iter().map(|r| r.0).sum::<f64>() / m;
    let var = results.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(FdrSimulation {
        side: spec.side,
        level: spec.level,
        reps: spec.reps,
        mean_fdp: mean,
        half_width: 1.96 * (var / m).sqrt(),
        mean_rejections: results.iter().map(|r| r.1 as f64).sum::<f64>() / m,
    })
}
