use rand::Rng;
use serde::{Deserialize, Serialize};

use super::knn::squared_distance;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Centroids of a k-means fit. Points belong to their nearest centroid, ties
/// going to the lowest index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
}

impl ClusterModel {
    pub fn assign(&self, point: &[f64]) -> usize {
        nearest(&self.centroids, point).0
    }

    pub fn assign_all<R: AsRef<[f64]>>(&self, points: &[R]) -> Vec<usize> {
        points.iter().map(|p| self.assign(p.as_ref())).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub model: ClusterModel,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_trace: Vec<f64>,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        *self.inertia_trace.last().expect("at least one assignment")
    }
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_points<R: AsRef<[f64]>>(points: &[R]) -> Result<usize> {
    let d = points.first().map_or(0, |p| p.as_ref().len());
    for p in points {
        let p = p.as_ref();
        if p.len() != d {
            return Err(Error::invalid("points differ in dimension"));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
    }
    Ok(d)
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iters` is reached. An empty cluster is moved onto the
/// point farthest from its centroid.
pub fn kmeans<R: AsRef<[f64]>>(points: &[R], k: usize, seed: u64, max_iters: usize) -> Result<KMeansFit> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let dim = check_points(points)?;
    let pt = |i: usize| points[i].as_ref();
    let mut rng = stream(seed, Stream::Cluster, &[k as u64]);

    let mut centroids: Vec<Vec<f64>> = vec![pt(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(pt(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(pt(next).to_vec());
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(pt(i), centroids.last().expect("pushed")));
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let (j, d) = nearest(&centroids, pt(i));
            inertia += d;
            if *label != j {
                *label = j;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &j) in labels.iter().enumerate() {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(pt(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .map(|i| (squared_distance(pt(i), &centroids[labels[i]]), i))
                    .fold((-1.0, 0), |best, c| if c.0 > best.0 { c } else { best });
                centroids[j] = pt(far.1).to_vec();
                counts[j] = 1;
                log::debug!("k-means: cluster {j} was empty; reseeded at point {}", far.1);
            }
        }
    }
    Ok(KMeansFit {
        model: ClusterModel { k, centroids },
        labels,
        inertia_trace: trace,
    })
}

/// Mean silhouette. Points in singleton clusters score 0, as do points whose
/// cohesion and separation are equal.
pub fn silhouette<R: AsRef<[f64]>>(points: &[R], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::invalid("silhouette needs one label per point"));
    }
    let k = labels.iter().max().expect("non-empty") + 1;
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Degenerate(
            "silhouette needs at least two non-empty clusters".into(),
        ));
    }
    let n = points.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        if sizes[labels[i]] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += squared_distance(points[i].as_ref(), points[j].as_ref()).sqrt();
            }
        }
        let own = labels[i];
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

pub const RESTARTS: u64 = 3;

/// Best of [`RESTARTS`] k-means runs by inertia.
pub fn kmeans_restarts<R: AsRef<[f64]>>(points: &[R], k: usize, seed: u64, max_iters: usize) -> Result<KMeansFit> {
    let mut best: Option<KMeansFit> = None;
    for r in 0..RESTARTS {
        let fit = kmeans(points, k, seed.wrapping_add(r.wrapping_mul(0x9e37_79b9)), max_iters)?;
        if best.as_ref().is_none_or(|b| fit.inertia() < b.inertia()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// The `k` in `range` with the highest silhouette; ties favor the smaller `k`.
pub fn select_k<R: AsRef<[f64]>>(
    points: &[R],
    range: std::ops::RangeInclusive<usize>,
    seed: u64,
    max_iters: usize,
) -> Result<(usize, KMeansFit)> {
    if range.is_empty() {
        return Err(Error::invalid("empty k range"));
    }
    if *range.start() < 2 || *range.end() > points.len() {
        return Err(Error::invalid(format!(
            "k range {range:?} must lie within 2..={}",
            points.len()
        )));
    }
    let mut best: Option<(f64, usize, KMeansFit)> = None;
    for k in range {
        let fit = kmeans_restarts(points, k, seed, max_iters)?;
        let s = match silhouette(points, &fit.labels) {
            Ok(s) => s,
            Err(Error::Degenerate(msg)) => {
                log::warn!("k = {k}: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|b| s > b.0) {
            best = Some((s, k, fit));
        }
    }
    best.map(|(_, k, fit)| (k, fit))
        .ok_or_else(|| Error::Degenerate("no k in range produced two non-empty clusters".into()))
}
