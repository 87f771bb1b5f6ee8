//! Partitions and CSV round trips.

mod common;

use common::{config, CASES};
use ivpile::data::{load_csv, make_folds_n, split_indices, write_csv, ObservationTable, OutcomeKind, Schema};
use ndarray::Array2;
use proptest::prelude::*;

fn sign() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(-1.0)]
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -10.0f64..10.0,
        1 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
        1 => Just(0.0),
        1 => Just(-0.0),
    ]
}

fn table() -> impl Strategy<Value = ObservationTable> {
    (1usize..20, 1usize..5).prop_flat_map(|(n, d)| {
        (proptest::collection::vec(finite(), n * d), proptest::collection::vec((sign(), sign(), sign()), n)).prop_map(
            move |(xs, zay)| {
                let x = Array2::from_shape_vec((n, d), xs).unwrap();
                let z = zay.iter().map(|t| t.0).collect();
                let a = zay.iter().map(|t| t.1).collect();
                let y = zay.iter().map(|t| t.2).collect();
                ObservationTable::new(x, z, a, y, OutcomeKind::Binary).unwrap()
            },
        )
    })
}

fn is_partition(parts: &[Vec<usize>], n: usize) -> bool {
    let mut seen = vec![false; n];
    for p in parts {
        for &i in p {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
    }
    seen.into_iter().all(|s| s)
}

proptest! {
    #![proptest_config(config(CASES))]

    #[test]
    fn split_partitions_rows(n in 2usize..500, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let (train, test) = split_indices(n, frac, seed).unwrap();
        prop_assert!(is_partition(&[train, test], n));
    }

    #[test]
    fn folds_partition_rows_evenly(n in 2usize..500, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = make_folds_n(n, k, seed).unwrap();
        let parts: Vec<Vec<usize>> = (0..k).map(|f| folds.rows_in(f)).collect();
        prop_assert!(is_partition(&parts, n));
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for f in 0..k {
            prop_assert!(is_partition(&[folds.rows_in(f), folds.rows_outside(f)], n));
        }
    }
}

proptest! {
    #![proptest_config(config(1_000))]

    #[test]
    fn csv_round_trip_is_bitwise(t in table()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&t, &path).unwrap();
        let back = load_csv(&path, &Schema::standard(), OutcomeKind::Binary).unwrap();
        prop_assert_eq!(back.n(), t.n());
        for (a, b) in back.x().iter().zip(t.x().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back.z(), t.z());
        prop_assert_eq!(back.a(), t.a());
        prop_assert_eq!(back.y(), t.y());
    }
}
