use std::path::Path;

use contrafraud::dataio::{
    fit_schema, generate_synthetic, load_transactions, read_dataset, read_transactions, write_dataset, LabeledDataset,
    Split, SynthConfig, WindowConfig,
};
use contrafraud::Error;

const HEADER: &str = "account_id,timestamp,amount,direction,payment_type,country,cash,label";

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn two_by_three() -> String {
    let mut s = format!("{HEADER}\n");
    for (id, label) in [("a", 0), ("b", 1)] {
        for k in 0..3 {
            let t = 1_704_067_200 + k * 3600 * 30;
            s.push_str(&format!("{id},{t},{}.5,payin,card,FR,{},{label}\n", 100 + k, k % 2));
        }
    }
    s
}

#[test]
fn empty_file_gives_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.csv", &two_by_three());
    let schema = fit_schema(&read_transactions(&good, Split::Train, "label").unwrap()).unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let ds = load_transactions(&empty, &schema, WindowConfig::default()).unwrap();
    assert!(ds.is_empty());
    assert!(ds.series.is_empty() && ds.profiles.is_empty());
}

#[test]
fn two_accounts_three_events_each() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "tx.csv", &two_by_three());
    let schema = fit_schema(&read_transactions(&p, Split::Train, "label").unwrap()).unwrap();
    let ds = load_transactions(&p, &schema, WindowConfig::default()).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.labels, vec![0, 1]);
    for s in &ds.series {
        assert_eq!(s.real_len(), 3);
        assert_eq!(s.encoded.shape(), &[3, schema.d_input()]);
    }
    ds.check_alignment().unwrap();
}

#[test]
fn bad_amount_names_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{HEADER}\na,1704067200,10,payin,card,FR,0,0\na,1704070800,ten,payin,card,FR,0,0\n");
    let p = write(dir.path(), "tx.csv", &body);
    match read_transactions(&p, Split::Train, "label") {
        Err(Error::Record { line, field, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(field, "amount");
        }
        other => panic!("expected a record error, got {other:?}"),
    }
}

#[test]
fn missing_label_column_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = "account_id,timestamp,amount,direction,payment_type,country\na,1704067200,10,payin,card,FR\n";
    let p = write(dir.path(), "tx.csv", body);
    let err = read_transactions(&p, Split::Train, "label").unwrap_err();
    assert!(err.to_string().contains("label"), "{err}");
}

#[test]
fn unseen_level_goes_to_unknown_slot() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.csv", &two_by_three());
    let schema = fit_schema(&read_transactions(&train, Split::Train, "label").unwrap()).unwrap();
    let body = format!("{HEADER}\nz,1704067200,10,payin,card,XX,0,0\n");
    let test = write(dir.path(), "test.csv", &body);
    let ds = load_transactions(&test, &schema, WindowConfig::default()).unwrap();

    let mut offset = schema.numeric.len();
    let mut country = None;
    for col in &schema.categorical {
        if col.name == "country" {
            country = Some((offset, col));
        }
        offset += col.width();
    }
    let (start, col) = country.unwrap();
    assert_eq!(col.slot("XX"), col.levels.len());
    let row = ds.series[0].encoded.row_slice(0);
    let block = &row[start..start + col.width()];
    assert_eq!(block.iter().sum::<f64>(), 1.0);
    assert_eq!(block[col.levels.len()], 1.0);
}

#[test]
fn round_trip_is_bit_exact() {
    let cfg = SynthConfig {
        train_accounts: 40,
        test_accounts: 40,
        ..SynthConfig::default()
    };
    let (train, _) = generate_synthetic(&cfg, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&train, dir.path(), "train").unwrap();
    let back = read_dataset(&manifest).unwrap();
    assert_eq!(back, train);

    let schema = fit_schema(&train).unwrap();
    let a = LabeledDataset::from_raw(&train, &schema, WindowConfig::default()).unwrap();
    let b = LabeledDataset::from_raw(&back, &schema, WindowConfig::default()).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.series.iter().zip(&b.series) {
        let bits = |s: &[f64]| s.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(x.encoded.data()), bits(y.encoded.data()));
    }
}

#[test]
fn misaligned_profiles_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "tx.csv", &two_by_three());
    let schema = fit_schema(&read_transactions(&p, Split::Train, "label").unwrap()).unwrap();
    let mut ds = load_transactions(&p, &schema, WindowConfig::default()).unwrap();
    ds.profiles.swap(0, 1);
    assert!(ds.check_alignment().is_err());
    ds.profiles.pop();
    assert!(ds.check_alignment().is_err());
}
