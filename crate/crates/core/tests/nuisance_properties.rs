//! Probability outputs of the nuisance learners and the logit optimizer's descent.

mod common;

use common::config;
use ivpile::data::{ObservationTable, OutcomeKind};
use ivpile::nuisance::{fit_joint_prob, Classifier, EstimatorKind, ForestConfig, LogitConfig};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(seed: u64, n: usize, d: usize, k: usize) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
    let mut classes: Vec<usize> = f
        .rows()
        .into_iter()
        .map(|r| {
            let s: f64 = r.sum() + rng.random_range(-1.0..1.0);
            ((s + 3.0).max(0.0) as usize).min(k - 1)
        })
        .collect();
    // Every class present.
    for (c, slot) in classes.iter_mut().take(k).enumerate() {
        *slot = c;
    }
    (f, classes)
}

fn kinds() -> [EstimatorKind; 2] {
    [
        EstimatorKind::MultinomialLogit(LogitConfig::default()),
        EstimatorKind::RandomForest(ForestConfig { n_trees: 20, ..ForestConfig::default() }),
    ]
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn class_probabilities_form_a_distribution(seed in any::<u64>(), n in 8usize..60, d in 1usize..4, k in 2usize..5) {
        let (f, classes) = problem(seed, n, d, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for kind in kinds() {
            let m = Classifier::fit(&kind, f.view(), &classes, k, seed).unwrap();
            for _ in 0..20 {
                let x = ndarray::Array1::from_shape_fn(d, |_| rng.random_range(-5.0..5.0));
                let p = m.predict_proba(x.view());
                prop_assert_eq!(p.len(), k);
                prop_assert!(p.iter().all(|&v| v >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn joint_tables_are_coherent(seed in any::<u64>(), n in 16usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = |r: &mut ChaCha8Rng| if r.random::<bool>() { 1.0 } else { -1.0 };
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let mut z: Vec<f64> = (0..n).map(|_| s(&mut rng)).collect();
        z[0] = 1.0;
        z[1] = -1.0;
        let a = (0..n).map(|_| s(&mut rng)).collect();
        let y = (0..n).map(|_| s(&mut rng)).collect();
        let t = ObservationTable::new(x, z, a, y, OutcomeKind::Binary).unwrap();
        for kind in kinds() {
            let m = fit_joint_prob(&t, &kind, seed).unwrap();
            for row in t.x().rows() {
                for zv in [1.0, -1.0] {
                    let p = m.arm_probs(zv, row);
                    prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
                    prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
                prop_assert!(m.eight_probs(row).validate().is_ok());
            }
        }
    }

    #[test]
    fn logit_objective_never_increases(seed in any::<u64>(), n in 8usize..80, d in 1usize..4, k in 2usize..5) {
        let (f, classes) = problem(seed, n, d, k);
        let kind = EstimatorKind::MultinomialLogit(LogitConfig::default());
        let Classifier::Logit(m) = Classifier::fit(&kind, f.view(), &classes, k, 0).unwrap() else {
            unreachable!()
        };
        prop_assert!(!m.objective_trace.is_empty());
        prop_assert!(m.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
