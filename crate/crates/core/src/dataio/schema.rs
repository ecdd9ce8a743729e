use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::event::{weekday, Account, RawDataset, TransactionEvent};
use crate::error::{Error, Result};
use crate::numkernel::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericColumn {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

impl NumericColumn {
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// Sorted vocabulary; encoded as `levels.len() + 1` one-hot slots, the last
/// one reserved for levels not seen at fit time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    pub levels: Vec<String>,
}

impl CategoricalColumn {
    pub fn from_values<'a>(name: &str, values: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = values.into_iter().collect();
        CategoricalColumn {
            name: name.to_string(),
            levels: set.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn slot(&self, value: &str) -> usize {
        self.levels
            .binary_search_by(|l| l.as_str().cmp(value))
            .unwrap_or(self.levels.len())
    }

    pub fn one_hot_into(&self, value: &str, out: &mut Vec<f64>) {
        let start = out.len();
        out.resize(start + self.width(), 0.0);
        out[start + self.slot(value)] = 1.0;
    }
}

/// Mean and standard deviation of `values`; constant columns get std 1.
pub fn fit_numeric(name: &str, values: &[f64], warnings: &mut Vec<String>) -> Result<NumericColumn> {
    if values.is_empty() {
        return Err(Error::Data(format!("numeric column `{name}` has no values")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut std = var.sqrt();
    if !(std > 1e-12) {
        warnings.push(format!("numeric column `{name}` is constant; scaling std clamped to 1"));
        std = 1.0;
    }
    Ok(NumericColumn {
        name: name.to_string(),
        mean,
        std,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSchema {
    pub keyword_names: Vec<String>,
    pub numeric: Vec<NumericColumn>,
    pub categorical: Vec<CategoricalColumn>,
    /// Account-level descriptors (legal form, industry) used in profiles.
    pub descriptors: Vec<CategoricalColumn>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub(crate) const EVENT_CATEGORICALS: [&str; 4] = ["direction", "payment_type", "country", "weekday"];

/// Raw (unscaled) numeric and categorical fields of each event in a history.
///
/// Numeric fields are `log1p(|amount|)`, `log1p(gap in hours)` and one 0/1
/// value per keyword flag. The first event has gap 0.
pub(crate) fn event_fields(events: &[TransactionEvent]) -> Vec<(Vec<f64>, [&str; 4])> {
    let mut prev = None;
    events
        .iter()
        .map(|e| {
            let gap_hours = prev.map_or(0.0, |p: i64| (e.timestamp - p).max(0) as f64 / 3600.0);
            prev = Some(e.timestamp);
            let mut num = vec![e.amount.abs().ln_1p(), gap_hours.ln_1p()];
            num.extend(e.keyword_flags.iter().map(|&f| if f { 1.0 } else { 0.0 }));
            (
                num,
                [
                    e.direction.as_str(),
                    e.payment_type.as_str(),
                    e.country.as_str(),
                    weekday(e.timestamp),
                ],
            )
        })
        .collect()
}

impl EncodingSchema {
    /// Builds a schema from explicit columns.
    pub fn from_columns(
        keyword_names: Vec<String>,
        numeric: Vec<NumericColumn>,
        categorical: Vec<CategoricalColumn>,
        descriptors: Vec<CategoricalColumn>,
    ) -> Self {
        EncodingSchema {
            keyword_names,
            numeric,
            categorical,
            descriptors,
            warnings: Vec::new(),
        }
    }

    /// Width of one encoded event.
    pub fn d_input(&self) -> usize {
        self.numeric.len() + self.categorical.iter().map(CategoricalColumn::width).sum::<usize>()
    }

    /// Width of the one-hot descriptor block of a profile.
    pub fn d_descriptors(&self) -> usize {
        self.descriptors.iter().map(CategoricalColumn::width).sum()
    }

    /// Encodes a time-sorted event list as a `T x d_input` matrix.
    pub fn encode_events(&self, events: &[TransactionEvent]) -> Result<Tensor> {
        if events.is_empty() {
            return Err(Error::Data("cannot encode an empty event list".into()));
        }
        let n_num = 2 + self.keyword_names.len();
        if self.numeric.len() != n_num || self.categorical.len() != EVENT_CATEGORICALS.len() {
            return Err(Error::Data("schema does not describe transaction events".into()));
        }
        let mut data = Vec::with_capacity(events.len() * self.d_input());
        for (num, cat) in event_fields(events) {
            if num.len() != n_num {
                return Err(Error::Data(format!(
                    "event has {} keyword flags, schema expects {}",
                    num.len() - 2,
                    self.keyword_names.len()
                )));
            }
            for (v, col) in num.iter().zip(&self.numeric) {
                data.push(col.apply(*v));
            }
            for (v, col) in cat.iter().zip(&self.categorical) {
                col.one_hot_into(v, &mut data);
            }
        }
        Tensor::matrix(events.len(), self.d_input(), data)
    }

    pub fn encode_descriptors(&self, account: &Account, out: &mut Vec<f64>) {
        for (col, v) in self.descriptors.iter().zip([&account.legal_form, &account.industry]) {
            col.one_hot_into(v, out);
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, toml::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Fits vocabularies and numeric scaling on a training split.
pub fn fit_schema(train: &RawDataset) -> Result<EncodingSchema> {
    let n_num = 2 + train.keyword_names.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_num];
    let mut levels: Vec<BTreeSet<String>> = vec![BTreeSet::new(); EVENT_CATEGORICALS.len()];
    for acc in &train.accounts {
        for (num, cat) in event_fields(&acc.events) {
            if num.len() != n_num {
                return Err(Error::Data(format!(
                    "account `{}`: event keyword flags do not match the {} declared keywords",
                    acc.account_id,
                    train.keyword_names.len()
                )));
            }
            for (c, v) in columns.iter_mut().zip(num) {
                c.push(v);
            }
            for (set, v) in levels.iter_mut().zip(cat) {
                if !set.contains(v) {
                    set.insert(v.to_string());
                }
            }
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Data("fit_schema needs at least one record".into()));
    }
    let mut warnings = Vec::new();
    let mut names = vec!["log_amount".to_string(), "log_gap".to_string()];
    names.extend(train.keyword_names.iter().map(|k| format!("kw_{k}")));
    let numeric = names
        .iter()
        .zip(&columns)
        .map(|(n, c)| fit_numeric(n, c, &mut warnings))
        .collect::<Result<Vec<_>>>()?;
    let categorical = EVENT_CATEGORICALS
        .iter()
        .zip(levels)
        .map(|(n, set)| CategoricalColumn {
            name: n.to_string(),
            levels: set.into_iter().collect(),
        })
        .collect();
    let descriptors = vec![
        CategoricalColumn::from_values("legal_form", train.accounts.iter().map(|a| a.legal_form.as_str())),
        CategoricalColumn::from_values("industry", train.accounts.iter().map(|a| a.industry.as_str())),
    ];
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(EncodingSchema {
        keyword_names: train.keyword_names.clone(),
        numeric,
        categorical,
        descriptors,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_gets_unknown_slot() {
        let c = CategoricalColumn::from_values("x", ["b", "a", "c", "a"]);
        assert_eq!(c.levels, ["a", "b", "c"]);
        assert_eq!(c.width(), 4);
        assert_eq!(c.slot("c"), 2);
        assert_eq!(c.slot("zzz"), 3);
    }

    #[test]
    fn constant_column_clamps_std() {
        let mut w = Vec::new();
        let c = fit_numeric("k", &[2.0, 2.0, 2.0], &mut w).unwrap();
        assert_eq!((c.mean, c.std), (2.0, 1.0));
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn dimension_formula() {
        let mut w = Vec::new();
        let s = EncodingSchema::from_columns(
            vec![],
            vec![fit_numeric("n", &[1.0, 3.0], &mut w).unwrap()],
            vec![
                CategoricalColumn::from_values("p", ["x", "y"]),
                CategoricalColumn::from_values("q", ["u", "v", "w"]),
            ],
            vec![],
        );
        assert_eq!(s.d_input(), 1 + (2 + 1) + (3 + 1));
    }
}
