use contrafraud::calibrate::Side;
use contrafraud::classify::ScoreSet;
use contrafraud::pipeline::{
    detection_table, pca_project, rankme, read_records, write_records, Detection, EvalRecord, Histogram,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn rankme_of_orthogonal_rows_is_full() {
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { 3.0 } else { 0.0 }).collect())
        .collect();
    assert!((rankme(&rows).unwrap() - 4.0).abs() < 1e-9);
}

#[test]
fn rankme_of_rank_one_is_one() {
    let rows: Vec<Vec<f64>> = (1..=5).map(|k| vec![k as f64, 2.0 * k as f64, -(k as f64)]).collect();
    assert!((rankme(&rows).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn rankme_of_diag_two_one() {
    let rows = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
    let p: [f64; 2] = [2.0 / 3.0, 1.0 / 3.0];
    let expected = (-p.iter().map(|q| q * q.ln()).sum::<f64>()).exp();
    let r = rankme(&rows).unwrap();
    assert!((r - expected).abs() < 1e-12);
    assert!((r - 1.8899).abs() < 1e-4);
}

#[test]
fn rankme_of_zero_matrix_is_an_error() {
    assert!(rankme(&[vec![0.0; 3], vec![0.0; 3]]).is_err());
}

#[test]
fn collinear_points_have_flat_second_axis() {
    let rows: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64, 2.0 * k as f64 + 1.0, 0.5]).collect();
    let p = pca_project(&rows).unwrap();
    assert!(p.degenerate);
    assert!(p.coords.iter().all(|c| c[1].abs() < 1e-9));
    assert!(p.variance[0] > 0.0);
}

#[test]
fn isotropic_cloud_splits_variance_evenly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let p = pca_project(&rows).unwrap();
    assert!(!p.degenerate);
    let ratio = p.variance[1] / p.variance[0];
    assert!(ratio > 0.8 && ratio <= 1.0, "ratio {ratio}");
}

#[test]
fn first_axis_follows_the_wider_coordinate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-1.0..1.0)])
        .collect();
    let p = pca_project(&rows).unwrap();
    let mean_x = rows.iter().map(|r| r[0]).sum::<f64>() / rows.len() as f64;
    let cos: f64 = {
        let (mut dot, mut a, mut b) = (0.0, 0.0, 0.0);
        for (r, c) in rows.iter().zip(&p.coords) {
            let x = r[0] - mean_x;
            dot += x * c[0];
            a += x * x;
            b += c[0] * c[0];
        }
        dot / (a * b).sqrt()
    };
    assert!(cos > 0.99, "cos {cos}");
}

#[test]
fn histogram_counts_each_label() {
    let scores = vec![0.0, 0.05, 0.1, 0.3, 0.5, 0.55, 0.7, 0.9, 0.99, 1.0];
    let labels = vec![0, 0, 0, 1, 0, 1, 0, 1, 1, 1];
    let set = ScoreSet::new((0..10).map(|i| format!("a{i}")).collect(), scores, labels).unwrap();
    let h = Histogram::from_scores(&set, 10).unwrap();
    assert_eq!(h.nonfraud.iter().sum::<usize>(), 5);
    assert_eq!(h.fraud.iter().sum::<usize>(), 5);
    assert_eq!(h.nonfraud[0], 2);
    assert_eq!(h.fraud[9], 3);
    assert_eq!(h.to_tsv().lines().count(), 11);
    assert!(h.to_svg("cr").starts_with("<svg"));
}

fn record(seed: u64, bh: Option<usize>, hits: usize) -> EvalRecord {
    EvalRecord {
        seed,
        model: "cr".into(),
        side: Side::High,
        alpha: 0.01,
        bh_index: bh,
        detection: Detection {
            hits,
            false_hits: 0,
            class_size: 10,
        },
        realized_fdp: 0.0,
    }
}

#[test]
fn table_prints_na_when_no_seed_crosses() {
    let rows = detection_table(&[record(0, None, 0), record(1, None, 0)]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].na_seeds, 2);
    let tsv = contrafraud::pipeline::table_tsv(&rows);
    let line = tsv.lines().nth(1).unwrap();
    assert!(line.ends_with("NA\tNA\tNA\tNA"), "{line}");
}

#[test]
fn table_counts_missing_crossings_as_zero() {
    let rows = detection_table(&[record(0, Some(4), 4), record(1, None, 0)]);
    assert_eq!(rows[0].na_seeds, 1);
    assert!((rows[0].mean_hits - 2.0).abs() < 1e-12);
    assert!((rows[0].sd_hits - 8f64.sqrt()).abs() < 1e-12);
}

#[test]
fn records_round_trip_through_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eval.tsv");
    let recs = vec![record(0, Some(3), 3), record(1, None, 0)];
    write_records(&path, &recs).unwrap();
    assert_eq!(read_records(&path).unwrap(), recs);
}
