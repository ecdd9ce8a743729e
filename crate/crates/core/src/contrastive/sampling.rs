use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::bank::MemoryBank;
use crate::error::{Error, Result};
use crate::similarity::knn;

/// Bank index of a positive for the reference account `reference`.
///
/// Entries of the reference's own account are excluded; among the rest the
/// `kappa` entries with the closest profiles are found and one is drawn
/// uniformly. `profiles` is indexed by account. `None` when no entry is
/// eligible.
pub fn sample_positive<R: Rng>(
    bank: &MemoryBank,
    reference: usize,
    profiles: &[Vec<f64>],
    kappa: usize,
    rng: &mut R,
) -> Result<Option<usize>> {
    if kappa == 0 {
        return Err(Error::invalid("kappa must be at least 1"));
    }
    let eligible: Vec<usize> = (0..bank.len()).filter(|&i| bank.get(i).account != reference).collect();
    if eligible.is_empty() {
        return Ok(None);
    }
    let pop: Vec<&[f64]> = eligible
        .iter()
        .map(|&i| profiles[bank.get(i).account].as_slice())
        .collect();
    let near = knn(&profiles[reference], &pop, kappa)?;
    Ok(Some(eligible[near[rng.random_range(0..near.len())]]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Negatives {
    /// Bank indices, distinct.
    pub entries: Vec<usize>,
    /// True when fewer candidates than requested existed.
    pub shortfall: bool,
}

/// Up to `count` distinct bank entries whose accounts lie in a cluster other
/// than `reference_cluster`, drawn without replacement. `clusters` is indexed
/// by account.
pub fn sample_negatives<R: Rng>(
    bank: &MemoryBank,
    reference_cluster: usize,
    clusters: &[usize],
    count: usize,
    rng: &mut R,
) -> Negatives {
    let candidates: Vec<usize> = (0..bank.len())
        .filter(|&i| clusters[bank.get(i).account] != reference_cluster)
        .collect();
    if candidates.len() <= count {
        return Negatives {
            shortfall: candidates.len() < count,
            entries: candidates,
        };
    }
    let entries = index::sample(rng, candidates.len(), count)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    Negatives {
        entries,
        shortfall: false,
    }
}

/// Adds independent `N(0, sigma^2)` noise to every coordinate.
pub fn perturb<R: Rng>(examples: &mut [Vec<f64>], sigma: f64, rng: &mut R) -> Result<()> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let n = Normal::new(0.0, sigma).expect("valid sigma");
    for v in examples.iter_mut().flat_map(|e| e.iter_mut()) {
        *v += n.sample(rng);
    }
    Ok(())
}
