use serde::{Deserialize, Serialize};

use super::aggregate::{compute_aggregates, TabularProfile};
use super::event::{RawDataset, Split, TransactionEvent, SECONDS_PER_DAY};
use super::schema::EncodingSchema;
use crate::error::{Error, Result};
use crate::numkernel::Tensor;

/// One window of an account's events, encoded.
///
/// `encoded` has one row per mask entry; padding rows are zero and masked out.
#[derive(Clone, Debug, PartialEq)]
pub struct AccountSeries {
    pub account_id: String,
    /// Index of the window within the account's history.
    pub window: usize,
    pub events: Vec<TransactionEvent>,
    pub encoded: Tensor,
    pub mask: Vec<bool>,
}

impl AccountSeries {
    pub fn new(
        account_id: &str,
        window: usize,
        events: Vec<TransactionEvent>,
        schema: &EncodingSchema,
    ) -> Result<Self> {
        let encoded = schema.encode_events(&events)?;
        Ok(AccountSeries {
            account_id: account_id.to_string(),
            window,
            mask: vec![true; events.len()],
            events,
            encoded,
        })
    }

    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Copy with `extra` zero rows appended and masked out.
    pub fn padded(&self, extra: usize) -> AccountSeries {
        let (t, d) = (self.encoded.shape()[0], self.encoded.shape()[1]);
        let mut data = self.encoded.data().to_vec();
        data.resize((t + extra) * d, 0.0);
        let mut mask = self.mask.clone();
        mask.resize(t + extra, false);
        AccountSeries {
            account_id: self.account_id.clone(),
            window: self.window,
            events: self.events.clone(),
            encoded: Tensor::matrix(t + extra, d, data).expect("finite padding"),
            mask,
        }
    }
}

/// Splits a time-sorted history into windows of `window_days`, anchored at the
/// first event and advancing by `stride_days`.
///
/// Empty windows are skipped. Windows holding more than `max_len` events keep
/// the most recent `max_len`. Returns `(window index, events)` pairs.
pub fn window_series(
    history: &[TransactionEvent],
    window_days: u32,
    stride_days: u32,
    max_len: usize,
) -> Result<Vec<(usize, Vec<TransactionEvent>)>> {
    if window_days == 0 || stride_days == 0 || max_len == 0 {
        return Err(Error::invalid("window, stride and max_len must be positive"));
    }
    let Some(first) = history.first() else {
        return Ok(Vec::new());
    };
    let start = first.timestamp;
    let last = history.last().expect("non-empty").timestamp;
    let width = window_days as i64 * SECONDS_PER_DAY;
    let stride = stride_days as i64 * SECONDS_PER_DAY;
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let lo = start + k as i64 * stride;
        if lo > last {
            break;
        }
        let hi = lo + width;
        let a = history.partition_point(|e| e.timestamp < lo);
        let b = history.partition_point(|e| e.timestamp < hi);
        if b > a {
            let from = b.saturating_sub(max_len).max(a);
            out.push((k, history[from..b].to_vec()));
        }
        k += 1;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub window_days: u32,
    pub stride_days: u32,
    pub max_len: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_days: 90,
            stride_days: 90,
            max_len: 256,
        }
    }
}

/// Aligned series, profiles and labels for one split.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub split: Split,
    pub series: Vec<AccountSeries>,
    pub profiles: Vec<TabularProfile>,
    pub labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn empty(split: Split) -> Self {
        LabeledDataset {
            split,
            series: Vec::new(),
            profiles: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Encodes every account using its most recent non-empty window.
    ///
    /// Accounts without events are dropped with a warning.
    pub fn from_raw(raw: &RawDataset, schema: &EncodingSchema, windows: WindowConfig) -> Result<Self> {
        let mut ds = LabeledDataset::empty(raw.split);
        for acc in &raw.accounts {
            if acc.label > 1 {
                return Err(Error::Data(format!(
                    "account `{}`: label {} is not binary",
                    acc.account_id, acc.label
                )));
            }
            let mut events = acc.events.clone();
            events.sort_by_key(|e| e.timestamp);
            let Some((k, window)) =
                window_series(&events, windows.window_days, windows.stride_days, windows.max_len)?.pop()
            else {
                log::warn!("account `{}` has no events; skipped", acc.account_id);
                continue;
            };
            let series = AccountSeries::new(&acc.account_id, k, window, schema)?;
            ds.profiles.push(compute_aggregates(&series, acc, schema));
            ds.series.push(series);
            ds.labels.push(acc.label);
        }
        ds.check_alignment()?;
        Ok(ds)
    }

    pub fn check_alignment(&self) -> Result<()> {
        if self.series.len() != self.labels.len() || self.profiles.len() != self.labels.len() {
            return Err(Error::Data("series, profiles and labels differ in length".into()));
        }
        for (s, p) in self.series.iter().zip(&self.profiles) {
            if s.account_id != p.account_id {
                return Err(Error::Data(format!(
                    "series `{}` aligned with profile `{}`",
                    s.account_id, p.account_id
                )));
            }
        }
        Ok(())
    }

    pub fn fraud_count(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}
