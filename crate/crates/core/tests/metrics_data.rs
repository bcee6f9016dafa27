use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xaml_core::data::{
    augment_duplicate_noise, encode_targets, kfold_split, load_csv, one_hot_encode, standardize_apply, standardize_fit,
};
use xaml_core::metrics::{accuracy, confusion_matrix, f1_per_class, jaccard_per_class, jaccard_variance, pearson_r};
use xaml_core::{AugmentationSpec, ConfusionMatrix, Error, Matrix, TableSchema, TaskKind, Targets};

#[test]
fn confusion_and_accuracy_oracles() {
    let cm = confusion_matrix(&[0, 0, 1, 1], &[0, 1, 0, 1], 2).unwrap();
    assert_eq!(cm.counts, vec![vec![1, 1], vec![1, 1]]);
    assert_eq!(accuracy(&cm).unwrap(), 0.5);
    let j = jaccard_per_class(&cm).unwrap();
    assert!((j[0] - 1.0 / 3.0).abs() < 1e-15 && (j[1] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(f1_per_class(&cm).unwrap(), vec![0.5, 0.5]);

    let wrong = ConfusionMatrix::from_counts(vec![vec![0, 3], vec![0, 0]]).unwrap();
    assert_eq!(accuracy(&wrong).unwrap(), 0.0);
    assert_eq!(f1_per_class(&wrong).unwrap(), vec![0.0, 0.0]);

    let diag = confusion_matrix(&[0, 1, 1, 0], &[0, 1, 1, 0], 3).unwrap();
    assert_eq!(diag.counts, vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 0]]);
    assert_eq!(accuracy(&diag).unwrap(), 1.0);
    assert_eq!(jaccard_per_class(&diag).unwrap(), vec![1.0, 1.0, 1.0]);
    assert_eq!(diag.empty_classes(), vec![false, false, true]);

    assert!(matches!(confusion_matrix(&[], &[], 2), Err(Error::InvalidArgument(_))));
}

#[test]
fn variance_and_correlation_oracles() {
    assert_eq!(jaccard_variance(&[0.0, 1.0]).unwrap(), 0.25);
    assert_eq!(jaccard_variance(&[1.0 / 3.0, 1.0 / 3.0]).unwrap(), 0.0);
    assert_eq!(jaccard_variance(&[0.7; 9]).unwrap(), 0.0);

    let y = [1.0, 2.0, 3.0, 7.5];
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    assert!((pearson_r(&y, &y).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson_r(&y, &neg).unwrap() + 1.0).abs() < 1e-15);
    assert!((pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(pearson_r(&y, &[2.0; 4]), Err(Error::DegenerateInput(_))));
}

fn random_confusion(rng: &mut ChaCha8Rng) -> ConfusionMatrix {
    let k = rng.random_range(2..=8);
    let counts = (0..k)
        .map(|_| (0..k).map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(0..50) }).collect())
        .collect();
    ConfusionMatrix::from_counts(counts).unwrap()
}

#[test]
fn jaccard_f1_identity_and_ranking_on_100_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let cm = random_confusion(&mut rng);
        let j = jaccard_per_class(&cm).unwrap();
        let f = f1_per_class(&cm).unwrap();
        let empty = cm.empty_classes();
        for c in 0..cm.k {
            if !empty[c] {
                let implied = f[c] / (2.0 - f[c]);
                assert!((j[c] - implied).abs() <= 1e-15, "case {case} class {c}");
            }
        }
        for a in 0..cm.k {
            for b in 0..cm.k {
                if !empty[a] && !empty[b] {
                    assert_eq!(j[a].partial_cmp(&j[b]), f[a].partial_cmp(&f[b]), "case {case}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pearson_is_affine_invariant(seed in any::<u64>(), n in 3usize..60, a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = p.iter().map(|v| a * v + b).collect();
        let flipped: Vec<f64> = p.iter().map(|v| -a * v + b).collect();
        let r = pearson_r(&y, &p).unwrap();
        prop_assert!((pearson_r(&y, &shifted).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson_r(&y, &flipped).unwrap() + r).abs() < 1e-9);
        prop_assert!(r.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn augmentation_bounds(seed in any::<u64>(), n in 1usize..80, d in 1usize..6, factor in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_row_major(n, d, (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
        let y: Vec<usize> = (0..n).collect();
        let spec = AugmentationSpec { duplication_factor: factor, ..AugmentationSpec::default() };
        let (xa, ya) = augment_duplicate_noise(&x, &y, &spec, seed).unwrap();
        prop_assert_eq!(xa.rows(), n * factor);
        for r in 0..n {
            prop_assert_eq!(xa.row(r), x.row(r));
        }
        for j in 0..d {
            let col = x.column_values(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let sigma = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            for r in n..n * factor {
                let diff = (xa.get(r, j) - x.get(r % n, j)).abs();
                prop_assert!(diff <= 0.001 * sigma * (1.0 + 1e-12) + 1e-15);
            }
        }
        for (r, label) in ya.iter().enumerate() {
            prop_assert_eq!(*label, r % n);
        }
    }
}

#[test]
fn augmentation_identity_factor() {
    let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
    let spec = AugmentationSpec {
        duplication_factor: 1,
        ..AugmentationSpec::default()
    };
    let (xa, ya) = augment_duplicate_noise(&x, &["a", "b"], &spec, 0).unwrap();
    assert_eq!(xa, x);
    assert_eq!(ya, vec!["a", "b"]);
}

#[test]
fn fold_partition_exhaustive_up_to_200() {
    for n in 2..=200 {
        for k in 2..=n {
            let plan = kfold_split(n, k, n as u64 * 1000 + k as u64).unwrap();
            assert_eq!(plan.assignment.len(), n);
            let mut sizes = vec![0usize; k];
            for &f in &plan.assignment {
                sizes[f] += 1;
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1 && *lo >= 1, "n={n} k={k}: {sizes:?}");
        }
    }
    // Test and training index lists are complementary and cover 0..n once.
    for (n, k) in [(2, 2), (17, 5), (200, 7), (200, 200)] {
        let plan = kfold_split(n, k, 3).unwrap();
        let mut seen = vec![0; n];
        for f in 0..k {
            let test = plan.test_indices(f);
            let train: HashSet<usize> = plan.train_indices(f).into_iter().collect();
            assert_eq!(test.len() + train.len(), n);
            for i in test {
                assert!(!train.contains(&i));
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|c| *c == 1));
    }
}

#[test]
fn fold_examples() {
    let plan = kfold_split(10, 5, 1).unwrap();
    assert_eq!(plan.fold_sizes(), vec![2; 5]);
    assert_eq!(plan, kfold_split(10, 5, 1).unwrap());
    let mut sizes = kfold_split(11, 5, 1).unwrap().fold_sizes();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
    assert!(kfold_split(3, 4, 0).is_err());
    assert!(kfold_split(3, 1, 0).is_err());
}

#[test]
fn one_hot_examples() {
    let v: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
    let (m, cats) = one_hot_encode(&v, 1).unwrap();
    assert_eq!(cats, vec!["a", "b"]);
    assert_eq!(m.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    let (m, cats) = one_hot_encode(&v, 2).unwrap();
    assert_eq!(cats, vec!["a"]);
    assert_eq!(m.to_rows(), vec![vec![1.0], vec![0.0], vec![1.0]]);
}

#[test]
fn standardization_contracts() {
    let x = Matrix::from_rows(&[vec![1.0, 5.0, 2.0], vec![2.0, 5.0, -4.0], vec![6.0, 5.0, 0.5]]).unwrap();
    let stats = standardize_fit(&x).unwrap();
    let z = standardize_apply(&x, &stats).unwrap();
    for j in [0, 2] {
        let col = z.column_values(j);
        let mean = col.iter().sum::<f64>() / 3.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-10 && (var.sqrt() - 1.0).abs() < 1e-10);
    }
    assert_eq!(z.column_values(1), vec![0.0; 3]);
    // Stats from other data give a fixed affine map.
    let other = Matrix::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
    let a = standardize_apply(&other, &stats).unwrap();
    assert_eq!(a, standardize_apply(&other, &stats).unwrap());
    assert!((a.get(0, 0) + stats.means[0] / stats.stds[0]).abs() < 1e-15);
}

#[test]
fn target_encoding_round_trip() {
    let labels: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
    let enc = encode_targets(&Targets::Labels(labels.clone()), TaskKind::Classification).unwrap();
    assert_eq!(enc.matrix.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    let codec = enc.codec.unwrap();
    for (i, c) in enc.matrix.row_argmax().into_iter().enumerate() {
        assert_eq!(codec.decode(c).unwrap(), labels[i]);
    }
    let values = vec![0.5, -2.0, 3.25];
    let enc = encode_targets(&Targets::Values(values.clone()), TaskKind::Regression).unwrap();
    assert_eq!(enc.matrix.column_values(0), values);
    assert!(enc.codec.is_none());
}

fn schema(json: &str) -> TableSchema {
    let s: TableSchema = serde_json::from_str(json).unwrap();
    s.validate().unwrap();
    s
}

#[test]
fn csv_loading_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let s = schema(
        r#"{"columns":[{"name":"a","kind":"numeric"},{"name":"b","kind":"numeric"},{"name":"y","kind":"target"}]}"#,
    );
    let good = dir.path().join("good.csv");
    std::fs::write(&good, "a,b,y\n1,2,p\n3,4,q\n5,6,p\n").unwrap();
    let table = load_csv(&good, &s).unwrap();
    let (data, _) = xaml_core::Dataset::from_table(&table, TaskKind::Classification).unwrap();
    assert_eq!(data.features.shape(), (3, 2));
    assert_eq!(data.targets.len(), 3);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,y\n1,2,p\n3,abc,q\n").unwrap();
    match load_csv(&bad, &s) {
        Err(Error::Parse { row, column, message, .. }) => {
            assert_eq!((row, column.as_str()), (3, "b"));
            assert!(message.contains("abc"));
        }
        other => panic!("expected a parse error, got {other:?}"),
    }

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "a,b,y\n").unwrap();
    assert!(matches!(load_csv(&empty, &s), Err(Error::EmptyDataset(_))));

    let renamed = dir.path().join("renamed.csv");
    std::fs::write(&renamed, "a,c,y\n1,2,p\n").unwrap();
    assert!(matches!(load_csv(&renamed, &s), Err(Error::HeaderMismatch { .. })));
}
