use contrafraud::rng::{stream, Stream};
use contrafraud::similarity::{kmeans, knn, select_k, silhouette, squared_distance};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn naive_knn(q: &[f64], pop: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = pop
        .iter()
        .enumerate()
        .map(|(i, p)| (squared_distance(q, p), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx.into_iter().take(k).map(|(_, i)| i).collect()
}

proptest! {
    #[test]
    fn knn_agrees_with_full_sort(
        pop in prop::collection::vec(prop::collection::vec(-3i32..3, 3), 1..40),
        q in prop::collection::vec(-3i32..3, 3),
        k in 1usize..50,
    ) {
        let pop: Vec<Vec<f64>> = pop.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect();
        let q: Vec<f64> = q.into_iter().map(f64::from).collect();
        let got = knn(&q, &pop, k).unwrap();
        prop_assert_eq!(got, naive_knn(&q, &pop, k.min(pop.len())));
    }
}

#[test]
fn knn_rejects_zero_k() {
    assert!(knn(&[0.0], &[vec![1.0]], 0).is_err());
}

fn blobs(seed: u64, per: usize, sigma: f64) -> Vec<Vec<f64>> {
    let centers = [[0.0, 0.0], [6.0, 0.0], [3.0, 5.0]];
    let mut rng = stream(seed, Stream::Synth, &[]);
    let n = Normal::new(0.0, sigma).unwrap();
    let mut out = Vec::new();
    for c in centers {
        for _ in 0..per {
            out.push(vec![c[0] + n.sample(&mut rng), c[1] + n.sample(&mut rng)]);
        }
    }
    out
}

#[test]
fn inertia_never_increases() {
    for seed in 0..20 {
        let mut rng = stream(seed, Stream::Simulate, &[]);
        let pts: Vec<Vec<f64>> = (0..150)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let fit = kmeans(&pts, 5, seed, 100).unwrap();
        for w in fit.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{:?}", fit.inertia_trace);
        }
    }
}

#[test]
fn three_blobs_select_three() {
    let pts = blobs(1, 100, 0.5);
    let (k, fit) = select_k(&pts, 2..=6, 1, 100).unwrap();
    assert_eq!(k, 3);
    assert!(silhouette(&pts, &fit.labels).unwrap() > 0.7);
}

#[test]
fn select_k_range_is_validated() {
    let pts = blobs(0, 2, 0.5);
    assert!(select_k(&pts, 1..=3, 0, 10).is_err());
    assert!(select_k(&pts, 2..=7, 0, 10).is_err());
}
