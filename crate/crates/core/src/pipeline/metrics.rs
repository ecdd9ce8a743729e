use nalgebra::{DMatrix, SymmetricEigen};

use crate::calibrate::{Side, ThresholdDecision};
use crate::error::{Error, Result};

fn to_matrix<R: AsRef<[f64]>>(rows: &[R]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    if n == 0 || d == 0 {
        return Err(Error::invalid("empty embedding matrix"));
    }
    let mut data = Vec::with_capacity(n * d);
    for r in rows {
        let r = r.as_ref();
        if r.len() != d {
            return Err(Error::shape(
                "embedding matrix",
                format!("rows of width {} and {d}", r.len()),
            ));
        }
        data.extend_from_slice(r);
    }
    Ok(DMatrix::from_row_slice(n, d, &data))
}

/// Effective rank: exponential of the entropy of the L1-normalized singular
/// values.
pub fn rankme<R: AsRef<[f64]>>(rows: &[R]) -> Result<f64> {
    let m = to_matrix(rows)?;
    let sv = m.singular_values();
    let total: f64 = sv.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("rankme of an all-zero matrix".into()));
    }
    let h: f64 = sv
        .iter()
        .map(|&s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok(h.exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// One `[x, y]` pair per input row.
    pub coords: Vec<[f64; 2]>,
    /// Variance captured by each axis.
    pub variance: [f64; 2],
    /// Set when the second axis had no variance to capture and was zeroed.
    pub degenerate: bool,
}

/// Centered rows projected onto the two leading principal directions. Each
/// direction's largest-magnitude loading is positive.
pub fn pca_project<R: AsRef<[f64]>>(rows: &[R]) -> Result<Projection> {
    let m = to_matrix(rows)?;
    let (n, d) = m.shape();
    if n < 2 {
        return Err(Error::invalid("projection needs at least two rows"));
    }
    let mean = m.row_mean();
    let mut c = m;
    for mut r in c.row_iter_mut() {
        r -= &mean;
    }
    let cov = c.transpose() * &c / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * 1e-12 * d as f64;
    let mut axes = Vec::new();
    let mut variance = [0.0; 2];
    for (k, &j) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[j];
        if k > 0 && (lambda <= tol || !(lambda > 0.0)) {
            break;
        }
        let mut v = eig.eigenvectors.column(j).into_owned();
        let lead = v
            .iter()
            .copied()
            .fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if lead < 0.0 {
            v = -v;
        }
        variance[k] = lambda.max(0.0);
        axes.push(v);
    }
    let degenerate = axes.len() < 2;
    if degenerate {
        log::warn!("fewer than two non-degenerate directions; second coordinate set to zero");
    }
    let coords = c
        .row_iter()
        .map(|r| {
            let mut p = [0.0; 2];
            for (k, v) in axes.iter().enumerate() {
                p[k] = r.dot(&v.transpose());
            }
            p
        })
        .collect();
    Ok(Projection {
        coords,
        variance,
        degenerate,
    })
}

/// Counts behind one detection-table cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    /// Correct declarations: frauds on the high side, non-frauds on the low side.
    pub hits: usize,
    pub false_hits: usize,
    /// Size of the class the side is looking for.
    pub class_size: usize,
}

impl Detection {
    pub fn from_decision(d: &ThresholdDecision, labels: &[u8]) -> Self {
        let target = match d.side {
            Side::High => 1,
            Side::Low => 0,
        };
        let false_hits = d.false_discoveries(labels);
        Detection {
            hits: d.rejections() - false_hits,
            false_hits,
            class_size: labels.iter().filter(|&&y| y == target).count(),
        }
    }

    pub fn share_of_class(&self) -> f64 {
        if self.class_size == 0 {
            0.0
        } else {
            self.hits as f64 / self.class_size as f64
        }
    }

    /// F1 of the declared set against the side's target class.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.hits + self.false_hits + (self.class_size - self.hits);
        if denom == 0 {
            0.0
        } else {
            2.0 * self.hits as f64 / denom as f64
        }
    }
}
