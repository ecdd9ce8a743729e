use serde::{Deserialize, Serialize};

use super::event::{Account, Direction, TransactionEvent};
use super::schema::EncodingSchema;
use super::series::AccountSeries;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularProfile {
    pub account_id: String,
    pub values: Vec<f64>,
}

pub const AGGREGATE_NAMES: [&str; 8] = [
    "payout_sum",
    "payout_mean",
    "payout_max",
    "payout_min",
    "payin_sum",
    "payin_mean",
    "event_count",
    "payout_payin_ratio",
];

/// Amount aggregates of an event list, in [`AGGREGATE_NAMES`] order.
///
/// Empty directions contribute zeros; the ratio of payout to payin counts is
/// 0 when there are no payins.
pub fn aggregate_events(events: &[TransactionEvent]) -> [f64; 8] {
    let mut out_sum = 0.0;
    let mut out_max = f64::NEG_INFINITY;
    let mut out_min = f64::INFINITY;
    let mut n_out = 0usize;
    let mut in_sum = 0.0;
    let mut n_in = 0usize;
    for e in events {
        match e.direction {
            Direction::Payout => {
                out_sum += e.amount;
                out_max = out_max.max(e.amount);
                out_min = out_min.min(e.amount);
                n_out += 1;
            }
            Direction::Payin => {
                in_sum += e.amount;
                n_in += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    [
        out_sum,
        mean(out_sum, n_out),
        if n_out == 0 { 0.0 } else { out_max },
        if n_out == 0 { 0.0 } else { out_min },
        in_sum,
        mean(in_sum, n_in),
        events.len() as f64,
        if n_in == 0 { 0.0 } else { n_out as f64 / n_in as f64 },
    ]
}

/// Aggregates of the series' real events followed by one-hot descriptors.
pub fn compute_aggregates(series: &AccountSeries, account: &Account, schema: &EncodingSchema) -> TabularProfile {
    let mut values = aggregate_events(&series.events).to_vec();
    schema.encode_descriptors(account, &mut values);
    TabularProfile {
        account_id: series.account_id.clone(),
        values,
    }
}

/// Per-coordinate z-scoring fitted on one set of vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Constant coordinates get std 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Data("cannot standardize zero rows".into()))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(Error::Data("rows differ in dimension".into()));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::Data(format!(
                "row has {} values, standardizer expects {}",
                row.len(),
                self.mean.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(amount: f64, direction: Direction) -> TransactionEvent {
        TransactionEvent {
            timestamp: 0,
            amount,
            direction,
            payment_type: "card".into(),
            country: "FR".into(),
            keyword_flags: vec![],
        }
    }

    #[test]
    fn payout_statistics() {
        let a = aggregate_events(&[ev(10.0, Direction::Payout), ev(30.0, Direction::Payout)]);
        assert_eq!(&a[..4], &[40.0, 20.0, 30.0, 10.0]);
        // no payins
        assert_eq!(a[5], 0.0);
        assert_eq!(a[7], 0.0);
    }

    #[test]
    fn singleton_series() {
        let a = aggregate_events(&[ev(7.5, Direction::Payout)]);
        assert_eq!(a[6], 1.0);
        assert_eq!(&a[..4], &[7.5; 4]);
    }

    #[test]
    fn ratio_counts_directions() {
        let a = aggregate_events(&[
            ev(1.0, Direction::Payout),
            ev(1.0, Direction::Payout),
            ev(1.0, Direction::Payout),
            ev(4.0, Direction::Payin),
            ev(6.0, Direction::Payin),
        ]);
        assert_eq!(a[7], 1.5);
        assert_eq!((a[4], a[5]), (10.0, 5.0));
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(s.apply(&[3.0, 5.0]).unwrap(), vec![1.0, 0.0]);
    }
}
