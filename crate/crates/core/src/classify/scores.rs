use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Scores in (0, 1) with their labels, aligned by position.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSet {
    pub account_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoreSet {
    pub fn new(account_ids: Vec<String>, scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if account_ids.len() != scores.len() || scores.len() != labels.len() {
            return Err(Error::Data(format!(
                "score set lengths differ: {} ids, {} scores, {} labels",
                account_ids.len(),
                scores.len(),
                labels.len()
            )));
        }
        for (id, (&s, &y)) in account_ids.iter().zip(scores.iter().zip(&labels)) {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Data(format!("account `{id}`: score {s} outside [0, 1]")));
            }
            if y > 1 {
                return Err(Error::Data(format!("account `{id}`: label {y} is not binary")));
            }
        }
        Ok(ScoreSet {
            account_ids,
            scores,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn fraud_count(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Tab-separated `account_id, score, label` with a header row. Scores are
    /// written with 17 significant digits so reading back is lossless.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "account_id\tscore\tlabel")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{}\t{:.17e}\t{}",
                self.account_ids[i], self.scores[i], self.labels[i]
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["account_id", "score", "label"] {
            return Err(Error::Data(format!(
                "{}: expected header account_id, score, label",
                path.display()
            )));
        }
        let (mut ids, mut scores, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let field = |k: usize, name: &str| {
                rec.get(k).ok_or_else(|| Error::Record {
                    line,
                    field: name.into(),
                    message: "missing".into(),
                })
            };
            ids.push(field(0, "account_id")?.to_string());
            scores.push(field(1, "score")?.parse::<f64>().map_err(|e| Error::Record {
                line,
                field: "score".into(),
                message: e.to_string(),
            })?);
            labels.push(field(2, "label")?.parse::<u8>().map_err(|e| Error::Record {
                line,
                field: "label".into(),
                message: e.to_string(),
            })?);
        }
        ScoreSet::new(ids, scores, labels)
    }
}
