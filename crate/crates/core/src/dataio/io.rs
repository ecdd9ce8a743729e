//! Delimited-text storage for raw datasets.
//!
//! A dataset is a TOML manifest next to two CSV files:
//!
//! ```text
//! <stem>.toml               split, file names, label column, keyword columns
//! <stem>_transactions.csv   account_id,timestamp,amount,direction,payment_type,country,<keywords...>,label
//! <stem>_accounts.csv       account_id,legal_form,industry
//! ```
//!
//! Reals are written in shortest round-trip form, so a write/read cycle is
//! lossless.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::event::{Account, Direction, RawDataset, Split, TransactionEvent};
use super::schema::EncodingSchema;
use super::series::{LabeledDataset, WindowConfig};
use crate::error::{Error, Result};

const FIXED: [&str; 6] = [
    "account_id",
    "timestamp",
    "amount",
    "direction",
    "payment_type",
    "country",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: Split,
    pub transactions: PathBuf,
    pub accounts: Option<PathBuf>,
    pub label_column: String,
    pub keyword_columns: Vec<String>,
}

fn record_err(line: u64, field: &str, message: impl Into<String>) -> Error {
    Error::Record {
        line: line as usize,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Reads a transactions file, grouping events by account in first-seen order
/// and sorting each account's events by time.
///
/// Columns other than the fixed ones and the label are keyword flags.
pub fn read_transactions(path: &Path, split: Split, label_column: &str) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(RawDataset {
            split,
            keyword_names: Vec::new(),
            accounts: Vec::new(),
        });
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut fixed = [0usize; 6];
    for (slot, name) in fixed.iter_mut().zip(FIXED) {
        *slot = col(name).ok_or_else(|| Error::Data(format!("{}: missing column `{name}`", path.display())))?;
    }
    let label_idx = col(label_column)
        .ok_or_else(|| Error::Data(format!("{}: missing label column `{label_column}`", path.display())))?;
    let kw: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| *i != label_idx && !FIXED.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut accounts: Vec<Account> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |i: usize| rec.get(i).unwrap_or("");
        let id = get(fixed[0]).to_string();
        if id.is_empty() {
            return Err(record_err(line, "account_id", "empty"));
        }
        let timestamp: i64 = get(fixed[1])
            .parse()
            .map_err(|_| record_err(line, "timestamp", format!("`{}` is not an integer", get(fixed[1]))))?;
        let amount: f64 = get(fixed[2])
            .parse()
            .ok()
            .filter(|a: &f64| a.is_finite())
            .ok_or_else(|| record_err(line, "amount", format!("`{}` is not a finite number", get(fixed[2]))))?;
        let direction = Direction::parse(get(fixed[3]))
            .ok_or_else(|| record_err(line, "direction", format!("`{}` is not payin/payout", get(fixed[3]))))?;
        let label: u8 = match get(label_idx) {
            "0" => 0,
            "1" => 1,
            other => return Err(record_err(line, label_column, format!("`{other}` is not 0/1"))),
        };
        let keyword_flags = kw
            .iter()
            .map(|(i, name)| parse_flag(get(*i)).ok_or_else(|| record_err(line, name, "expected 0/1")))
            .collect::<Result<Vec<bool>>>()?;
        let event = TransactionEvent {
            timestamp,
            amount,
            direction,
            payment_type: get(fixed[4]).to_string(),
            country: get(fixed[5]).to_string(),
            keyword_flags,
        };
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            accounts.push(Account {
                account_id: id.clone(),
                legal_form: String::new(),
                industry: String::new(),
                label,
                events: Vec::new(),
            });
            accounts.len() - 1
        });
        if accounts[slot].label != label {
            return Err(record_err(
                line,
                label_column,
                format!("account `{id}` has conflicting labels"),
            ));
        }
        accounts[slot].events.push(event);
    }
    for a in &mut accounts {
        a.events.sort_by_key(|e| e.timestamp);
    }
    Ok(RawDataset {
        split,
        keyword_names: kw.into_iter().map(|(_, n)| n).collect(),
        accounts,
    })
}

/// Fills descriptors from an accounts file; unmatched accounts keep "unknown".
pub fn read_accounts(path: &Path, raw: &mut RawDataset) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut map: HashMap<String, (String, String)> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 3 {
            return Err(record_err(line, "industry", "expected account_id,legal_form,industry"));
        }
        map.insert(rec[0].to_string(), (rec[1].to_string(), rec[2].to_string()));
    }
    for a in &mut raw.accounts {
        let (lf, ind) = map
            .get(&a.account_id)
            .cloned()
            .unwrap_or_else(|| ("unknown".into(), "unknown".into()));
        a.legal_form = lf;
        a.industry = ind;
    }
    Ok(())
}

/// Reads transactions and encodes them with `schema`.
pub fn load_transactions(path: &Path, schema: &EncodingSchema, windows: WindowConfig) -> Result<LabeledDataset> {
    let raw = read_transactions(path, Split::Train, "label")?;
    if raw.accounts.is_empty() {
        return Ok(LabeledDataset::empty(Split::Train));
    }
    LabeledDataset::from_raw(&raw, schema, windows)
}

pub fn write_transactions(raw: &RawDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(raw.keyword_names.iter().cloned());
    header.push("label".into());
    w.write_record(&header)?;
    for a in &raw.accounts {
        for e in &a.events {
            let mut row = vec![
                a.account_id.clone(),
                e.timestamp.to_string(),
                format!("{}", e.amount),
                e.direction.as_str().to_string(),
                e.payment_type.clone(),
                e.country.clone(),
            ];
            row.extend(e.keyword_flags.iter().map(|&f| if f { "1" } else { "0" }.to_string()));
            row.push(a.label.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_accounts(raw: &RawDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["account_id", "legal_form", "industry"])?;
    for a in &raw.accounts {
        w.write_record([&a.account_id, &a.legal_form, &a.industry])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the manifest and both CSV files into `dir`; returns the manifest path.
pub fn write_dataset(raw: &RawDataset, dir: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let tx = format!("{stem}_transactions.csv");
    let acc = format!("{stem}_accounts.csv");
    write_transactions(raw, &dir.join(&tx))?;
    write_accounts(raw, &dir.join(&acc))?;
    let manifest = DatasetManifest {
        split: raw.split,
        transactions: tx.into(),
        accounts: Some(acc.into()),
        label_column: "label".into(),
        keyword_columns: raw.keyword_names.clone(),
    };
    let path = dir.join(format!("{stem}.toml"));
    std::fs::write(&path, toml::to_string(&manifest)?)?;
    Ok(path)
}

/// Reads a dataset through its manifest. Relative paths resolve against the
/// manifest's directory.
pub fn read_dataset(manifest_path: &Path) -> Result<RawDataset> {
    let text =
        std::fs::read_to_string(manifest_path).map_err(|e| Error::Data(format!("{}: {e}", manifest_path.display())))?;
    let m: DatasetManifest = toml::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut raw = read_transactions(&base.join(&m.transactions), m.split, &m.label_column)?;
    if !raw.accounts.is_empty() && raw.keyword_names != m.keyword_columns {
        return Err(Error::Data(format!(
            "keyword columns {:?} do not match manifest {:?}",
            raw.keyword_names, m.keyword_columns
        )));
    }
    raw.keyword_names = m.keyword_columns;
    match &m.accounts {
        Some(p) => read_accounts(&base.join(p), &mut raw)?,
        None => {
            for a in &mut raw.accounts {
                a.legal_form = "unknown".into();
                a.industry = "unknown".into();
            }
        }
    }
    Ok(raw)
}
