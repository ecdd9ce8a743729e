use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::experiment::SeedRun;
use super::metrics::Detection;
use crate::calibrate::Side;
use crate::classify::ScoreSet;
use crate::error::{Error, Result};

/// Score counts per label over equal-width bins of `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bins: usize,
    pub nonfraud: Vec<usize>,
    pub fraud: Vec<usize>,
}

impl Histogram {
    pub fn from_scores(scores: &ScoreSet, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        let mut h = Histogram {
            bins,
            nonfraud: vec![0; bins],
            fraud: vec![0; bins],
        };
        for (&s, &y) in scores.scores.iter().zip(&scores.labels) {
            let b = ((s * bins as f64) as usize).min(bins - 1);
            if y == 1 {
                h.fraud[b] += 1;
            } else {
                h.nonfraud[b] += 1;
            }
        }
        Ok(h)
    }

    pub fn edges(&self, b: usize) -> (f64, f64) {
        (b as f64 / self.bins as f64, (b + 1) as f64 / self.bins as f64)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("bin_low\tbin_high\tnonfraud\tfraud\n");
        for b in 0..self.bins {
            let (lo, hi) = self.edges(b);
            let _ = writeln!(s, "{lo}\t{hi}\t{}\t{}", self.nonfraud[b], self.fraud[b]);
        }
        s
    }

    /// Both label groups as overlaid bars, each normalized to its own total.
    pub fn to_svg(&self, title: &str) -> String {
        const W: f64 = 640.0;
        const H: f64 = 360.0;
        const M: f64 = 40.0;
        let share = |c: &[usize]| {
            let t = c.iter().sum::<usize>().max(1) as f64;
            c.iter().map(|&v| v as f64 / t).collect::<Vec<_>>()
        };
        let (nf, fr) = (share(&self.nonfraud), share(&self.fraud));
        let top = nf.iter().chain(&fr).copied().fold(0.0, f64::max).max(1e-12);
        let bw = (W - 2.0 * M) / self.bins as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        for (vals, color) in [(&nf, "#1f77b4"), (&fr, "#d62728")] {
            for (b, &v) in vals.iter().enumerate() {
                let h = v / top * (H - 2.0 * M);
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.5"/>"#,
                    M + b as f64 * bw,
                    H - M - h,
                    bw,
                    h
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<line x1="{M}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
            y = H - M,
            x2 = W - M
        );
        for t in 0..=4 {
            let x = M + (W - 2.0 * M) * t as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                H - M + 16.0,
                t as f64 / 4.0
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="30" width="12" height="12" fill="#1f77b4" fill-opacity="0.5"/>"##,
            W - 150.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="40">non-fraud</text>"#, W - 132.0);
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="48" width="12" height="12" fill="#d62728" fill-opacity="0.5"/>"##,
            W - 150.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="58">fraud</text>"#, W - 132.0);
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One calibrated decision of one model on one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub seed: u64,
    pub model: String,
    pub side: Side,
    pub alpha: f64,
    /// `None` when BH found no crossing.
    pub bh_index: Option<usize>,
    pub detection: Detection,
    pub realized_fdp: f64,
}

pub const EVAL_HEADER: &str = "seed\tmodel\tside\talpha\tbh_index\thits\tfalse_hits\tclass_size\trealized_fdp";

pub fn records_of(run: &SeedRun) -> Vec<EvalRecord> {
    let mut out = Vec::new();
    for m in &run.models {
        for d in &m.decisions {
            let detection = Detection::from_decision(d, &m.evaluated.labels);
            out.push(EvalRecord {
                seed: run.seed,
                model: m.model.clone(),
                side: d.side,
                alpha: d.level,
                bh_index: d.bh_index,
                realized_fdp: detection.false_hits as f64 / (detection.hits + detection.false_hits).max(1) as f64,
                detection,
            });
        }
    }
    out
}

pub fn write_records(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{EVAL_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.seed,
            r.model,
            r.side.as_str(),
            r.alpha,
            r.bh_index.map_or_else(|| "NA".to_string(), |i| i.to_string()),
            r.detection.hits,
            r.detection.false_hits,
            r.detection.class_size,
            r.realized_fdp
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == EVAL_HEADER => {}
        _ => return Err(Error::Data(format!("{}: unexpected header", path.display()))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |field: &str| Error::Record {
            line: i + 1,
            field: field.to_string(),
            message: "unparsable value".into(),
        };
        if f.len() != 9 {
            return Err(Error::Record {
                line: i + 1,
                field: "row".into(),
                message: format!("expected 9 fields, found {}", f.len()),
            });
        }
        let side = match f[2] {
            "high" => Side::High,
            "low" => Side::Low,
            _ => return Err(bad("side")),
        };
        out.push(EvalRecord {
            seed: f[0].parse().map_err(|_| bad("seed"))?,
            model: f[1].to_string(),
            side,
            alpha: f[3].parse().map_err(|_| bad("alpha"))?,
            bh_index: if f[4] == "NA" {
                None
            } else {
                Some(f[4].parse().map_err(|_| bad("bh_index"))?)
            },
            detection: Detection {
                hits: f[5].parse().map_err(|_| bad("hits"))?,
                false_hits: f[6].parse().map_err(|_| bad("false_hits"))?,
                class_size: f[7].parse().map_err(|_| bad("class_size"))?,
            },
            realized_fdp: f[8].parse().map_err(|_| bad("realized_fdp"))?,
        });
    }
    Ok(out)
}

/// One row of the detection table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub side: Side,
    pub alpha: f64,
    pub seeds: usize,
    /// Seeds where BH found no crossing.
    pub na_seeds: usize,
    pub mean_hits: f64,
    pub sd_hits: f64,
    pub mean_share: f64,
    pub mean_f1: f64,
    pub mean_fdp: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

/// Groups records by model, side and level. Seeds without a crossing count
/// as zero detections.
pub fn detection_table(records: &[EvalRecord]) -> Vec<TableRow> {
    let mut groups: BTreeMap<(String, &str, u64), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.model.clone(), r.side.as_str(), r.alpha.to_bits()))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let hits: Vec<f64> = g.iter().map(|r| r.detection.hits as f64).collect();
            let (mean_hits, sd_hits) = mean_sd(&hits);
            let avg = |f: &dyn Fn(&EvalRecord) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / g.len() as f64;
            TableRow {
                model: g[0].model.clone(),
                side: g[0].side,
                alpha: g[0].alpha,
                seeds: g.len(),
                na_seeds: g.iter().filter(|r| r.bh_index.is_none()).count(),
                mean_hits,
                sd_hits,
                mean_share: avg(&|r| r.detection.share_of_class()),
                mean_f1: avg(&|r| r.detection.f1()),
                mean_fdp: avg(&|r| r.realized_fdp),
            }
        })
        .collect()
}

pub const TABLE_HEADER: &str = "model\tside\tfdr\tseeds\tna_seeds\tdetections\tpct_of_class\tf1\trealized_fdp";

/// Rows where no seed found a crossing print `NA` in every statistic.
pub fn table_tsv(rows: &[TableRow]) -> String {
    let mut s = format!("{TABLE_HEADER}\n");
    for r in rows {
        let stats = if r.na_seeds == r.seeds {
            "NA\tNA\tNA\tNA".to_string()
        } else {
            format!(
                "{:.1} ± {:.1}\t{:.2}\t{:.4}\t{:.4}",
                r.mean_hits,
                r.sd_hits,
                100.0 * r.mean_share,
                r.mean_f1,
                r.mean_fdp
            )
        };
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{stats}",
            r.model,
            r.side.as_str(),
            r.alpha,
            r.seeds,
            r.na_seeds
        );
    }
    s
}
