//! File formats, splitting and result records.

mod common;

use common::*;
use l2p_select::io::{
    format_f64, parse_dense_csv, parse_libsvm, read_dense_csv, read_result, split, split_indices, stratified_counts,
    to_json_bytes, write_dense_csv, write_result, RankEntry, ResultFormat, ResultRecord, SplitSpec,
};
use l2p_select::{Dataset, Error, SolverConfig};
use proptest::prelude::*;

fn dataset(seed: u64, m: usize, n: usize, c: usize) -> Dataset {
    let mut r = rng(seed);
    let x = gaussian(&mut r, m, n);
    Dataset::new(x, shuffled_labels(&mut r, m, c), c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dense_csv_round_trip(seed in any::<u64>(), m in 2usize..20, n in 1usize..8, header in any::<bool>()) {
        let ds = dataset(seed, m.max(2), n, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dense_csv(&path, &ds, header).unwrap();
        let back = read_dense_csv(&path, header, None).unwrap();
        prop_assert_eq!(back.features.as_slice(), ds.features.as_slice());
        // Class ids are renumbered by first appearance; the text survives.
        let names = |d: &Dataset| d.labels.iter().map(|&y| d.class_names[y - 1].clone()).collect::<Vec<_>>();
        prop_assert_eq!(names(&back), names(&ds));
    }

    #[test]
    fn libsvm_matches_dense(seed in any::<u64>(), m in 2usize..12, n in 1usize..6) {
        let mut r = rng(seed);
        let ds = dataset(seed, m, n, 2);
        let mut text = String::new();
        let mut dense = String::new();
        for i in 0..m {
            text.push_str(&ds.labels[i].to_string());
            for j in 0..n {
                // Sparsify about a third of the entries, but keep the last
                // column so the width is known.
                let v = if j + 1 < n && rand::Rng::random_range(&mut r, 0..3) == 0 { 0.0 } else { ds.features[(i, j)] };
                if v != 0.0 {
                    text.push_str(&format!(" {}:{}", j + 1, v));
                }
                dense.push_str(&format!("{v},"));
            }
            text.push('\n');
            dense.push_str(&format!("{}\n", ds.labels[i]));
        }
        let a = parse_libsvm(text.as_bytes(), "mem").unwrap();
        let b = parse_dense_csv(dense.as_bytes(), "mem", false, None).unwrap();
        prop_assert_eq!(a.features.as_slice(), b.features.as_slice());
        prop_assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn split_partitions_and_stratifies(seed in any::<u64>(), m in 6usize..60, c in 2usize..4, frac in 0.2f64..0.8) {
        let ds = dataset(seed, m.max(2 * c), 3, c);
        let spec = SplitSpec { train_fraction: frac, seed, stratified: true };
        let (train, test) = split_indices(&ds, &spec).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.samples()).collect::<Vec<_>>());
        prop_assert!(train.windows(2).all(|w| w[0] < w[1]));
        for k in 1..=c {
            let in_train = train.iter().filter(|&&i| ds.labels[i] == k).count();
            let total = ds.labels.iter().filter(|&&y| y == k).count();
            prop_assert!(in_train >= 1 && in_train < total);
            // Within one sample of the exact share, up to the clamp.
            let share = total as f64 * train.len() as f64 / ds.samples() as f64;
            prop_assert!((in_train as f64 - share).abs() < 1.0 + 1e-9 || in_train == 1 || in_train == total - 1);
        }
        prop_assert_eq!(split_indices(&ds, &spec).unwrap(), (train, test));
    }

    #[test]
    fn largest_remainder_sums(sizes in proptest::collection::vec(2usize..40, 1..6), frac in 0.05f64..0.95) {
        let m: usize = sizes.iter().sum();
        let total = ((frac * m as f64).round() as usize).clamp(sizes.len(), m - sizes.len());
        let counts = stratified_counts(&sizes, total);
        for (&c, &s) in counts.iter().zip(&sizes) {
            prop_assert!(c >= 1 && c < s);
        }
        prop_assert_eq!(counts.iter().sum::<usize>(), total);
    }

    #[test]
    fn floats_round_trip_through_json(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        let bytes = to_json_bytes(&vec![v]).unwrap();
        let back: Vec<f64> = serde_json::from_slice(&bytes).unwrap();
        prop_assert_eq!(back[0].to_bits(), v.to_bits());
    }
}

#[test]
fn split_standardizes_with_training_statistics() {
    let ds = dataset(5, 30, 4, 3);
    let (train, test) = split(&ds, &SplitSpec::default()).unwrap();
    assert_eq!(train.samples() + test.samples(), 30);
    for j in 0..4 {
        let col = train.features.column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
    assert_eq!(train.normalization, test.normalization);

    let (idx_train, idx_test) = split_indices(&ds, &SplitSpec::default()).unwrap();
    let stats = train.normalization.as_ref().unwrap();
    let raw = ds.subset(&idx_test);
    assert_eq!(stats.apply(&raw.features).unwrap(), test.features);
    assert_eq!(idx_train.len(), train.samples());
}

#[test]
fn split_rejects_singleton_class() {
    let x = gaussian(&mut rng(1), 5, 2);
    let ds = Dataset::new(x, vec![1, 1, 1, 1, 2], 2).unwrap();
    assert!(matches!(
        split_indices(&ds, &SplitSpec::default()),
        Err(Error::Stratification { class: 2, count: 1 })
    ));
    let unstratified = SplitSpec {
        stratified: false,
        ..SplitSpec::default()
    };
    assert!(split_indices(&ds, &unstratified).is_ok());
}

#[test]
fn result_record_round_trip() {
    let record = ResultRecord {
        config: SolverConfig::with_p(0.3),
        selected: vec![4, 1],
        ranking: vec![
            RankEntry {
                feature: 4,
                norm: 0.1 + 0.2,
            },
            RankEntry {
                feature: 1,
                norm: 1.0 / 3.0,
            },
            RankEntry { feature: 2, norm: 0.0 },
        ],
        objective_trace: vec![std::f64::consts::PI, 1e-300, 5e-324],
        iterations: 3,
        converged: true,
        support_size: Some(2),
        precision_at_d: None,
        accuracy: Some(0.75),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_result(&record, &path, ResultFormat::Json).unwrap();
    assert_eq!(read_result(&path).unwrap(), record);
    let first = std::fs::read(&path).unwrap();
    write_result(&read_result(&path).unwrap(), &path, ResultFormat::Json).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);

    let csv_path = dir.path().join("r.csv");
    write_result(&record, &csv_path, ResultFormat::Csv).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "feature,norm");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("4,"));
    assert_eq!(lines[1][2..].parse::<f64>().unwrap(), 0.1 + 0.2);
}

#[test]
fn parse_errors_carry_locations() {
    let err = parse_dense_csv("1,2,a\n1,x,b\n".as_bytes(), "f.csv", false, None).unwrap_err();
    match err {
        Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 2)),
        other => panic!("unexpected {other:?}"),
    }
    let err = parse_libsvm("1 2:1 1:3\n".as_bytes(), "f.svm").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
    assert!(parse_dense_csv("1,nan,a\n2,3,b\n".as_bytes(), "f", false, None).is_err());
    assert!(read_dense_csv("/nonexistent/file.csv", false, None).is_err());
}
