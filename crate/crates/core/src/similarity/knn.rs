use crate::error::{Error, Result};

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` rows of `population` closest to `query` in Euclidean
/// distance, nearest first. Equal distances are ordered by index.
///
/// Callers exclude the query itself by leaving it out of `population`.
pub fn knn<R: AsRef<[f64]>>(query: &[f64], population: &[R], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("knn needs k >= 1"));
    }
    let mut d: Vec<(f64, usize)> = population
        .iter()
        .enumerate()
        .map(|(i, p)| (squared_distance(query, p.as_ref()), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(cmp);
    Ok(d.into_iter().map(|(_, i)| i).collect())
}
