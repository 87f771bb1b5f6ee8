//! End-to-end estimators on data with known response-type structure.

mod common;

use std::sync::Arc;

use common::{eight, table_from_types};
use ivpile::bounds::{balke_pearl, estimate_intervals, BoundMethod, Interval};
use ivpile::data::{ObservationTable, OutcomeKind};
use ivpile::estimators::{fit_nuisance, fit_plug_in, ivpile, ivpile_split, Method, PipelineConfig};
use ivpile::nuisance::{EstimatorKind, ForestConfig};
use ivpile::transform::{bayes_sign, eta, weight_label};
use ivpile::wsvm::{train_wsvm, KernelSpec, SolverOptions, TreatmentRule};
use ndarray::Array2;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A one-dimensional discrete support; each point carries its own response-type mixture.
struct Support {
    points: Vec<f64>,
    mixes: Vec<Vec<f64>>,
}

impl Support {
    fn random(k: usize, rng: &mut ChaCha8Rng) -> Self {
        let points = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
        let mixes = (0..k)
            .map(|_| {
                let raw: Vec<f64> = (0..16).map(|_| -rng.random::<f64>().ln()).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            })
            .collect();
        Support { points, mixes }
    }

    fn intervals(&self) -> Vec<Interval> {
        self.mixes.iter().map(|q| balke_pearl(&eight(&table_from_types(q).0)).unwrap()).collect()
    }

    /// `n` rows: support point uniform, instrument a fair coin, `(A, Y)` from the point's type.
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> ObservationTable {
        let (mut x, mut z, mut a, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let j = rng.random_range(0..self.points.len());
            let t = WeightedIndex::new(&self.mixes[j]).unwrap().sample(rng);
            let r = common::response_type(t);
            let zv: i8 = if rng.random::<bool>() { 1 } else { -1 };
            let av = if zv == 1 { r[0] } else { r[1] };
            let yv = if av == 1 { r[2] } else { r[3] };
            x.push(self.points[j]);
            z.push(f64::from(zv));
            a.push(f64::from(av));
            y.push(f64::from(yv));
        }
        ObservationTable::new(Array2::from_shape_vec((n, 1), x).unwrap(), z, a, y, OutcomeKind::Binary).unwrap()
    }
}

fn forest_cfg(seed: u64) -> PipelineConfig {
    PipelineConfig {
        estimator: EstimatorKind::RandomForest(ForestConfig { n_trees: 50, ..ForestConfig::default() }),
        kernel: KernelSpec::Gaussian { sigma: 0.1 },
        lambda: 1e-3,
        seed,
        ..PipelineConfig::default()
    }
}

#[test]
fn oracle_tables_recover_the_bayes_rule_on_the_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut agree, mut total) = (0, 0);
    for _ in 0..10 {
        let s = Support::random(12, &mut rng);
        let ivs = s.intervals();
        // Each support point repeated, as a large sample would.
        let reps = 20;
        let xs = Array2::from_shape_fn((12 * reps, 1), |(i, _)| s.points[i % 12]);
        let labels: Vec<_> = (0..12 * reps).map(|i| weight_label(&ivs[i % 12])).collect();
        let fit = train_wsvm(xs.view(), &labels, KernelSpec::Gaussian { sigma: 0.05 }, 1e-5, &SolverOptions::default())
            .unwrap();
        let grid = Array2::from_shape_vec((12, 1), s.points.clone()).unwrap();
        let signs = fit.rule.signs(grid.view());
        for (iv, sg) in ivs.iter().zip(&signs) {
            if eta(iv) != 0.0 {
                total += 1;
                agree += usize::from(bayes_sign(iv) == *sg);
            }
        }
    }
    assert!(agree as f64 >= 0.95 * total as f64, "{agree}/{total}");
}

#[test]
fn learned_rule_tracks_the_bayes_rule_where_the_signal_is_clear() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = Support::random(6, &mut rng);
    let t = s.sample(2400, &mut rng);
    let fit = ivpile(&t, &forest_cfg(1)).unwrap();
    let grid = Array2::from_shape_vec((6, 1), s.points.clone()).unwrap();
    let signs = fit.rule.signs(grid.view());
    let clear: Vec<(f64, f64)> = s
        .intervals()
        .iter()
        .zip(&signs)
        .filter(|(iv, _)| eta(iv).abs() > 0.1)
        .map(|(iv, &sg)| (bayes_sign(iv), sg))
        .collect();
    assert!(!clear.is_empty());
    assert!(clear.iter().all(|(b, sg)| b == sg), "{clear:?}");
}

#[test]
fn labeled_and_unlabeled_counts_cover_the_classifier_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = Support::random(5, &mut rng);
    let t = s.sample(200, &mut rng);
    let cfg = forest_cfg(2);
    for fit in [ivpile(&t, &cfg).unwrap(), ivpile_split(&t, &cfg).unwrap()] {
        assert_eq!(fit.report.n_labeled + fit.report.n_unlabeled, fit.report.svm_rows.len());
    }
    let plug = fit_plug_in(&t, &cfg).unwrap();
    assert_eq!(plug.report.n_labeled + plug.report.n_unlabeled, t.n());
}

#[test]
fn sample_splitting_keeps_the_halves_apart() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = Support::random(5, &mut rng);
    for n in [40, 41, 200] {
        let t = s.sample(n, &mut rng);
        let fit = ivpile_split(&t, &forest_cfg(n as u64)).unwrap();
        let (nu, sv) = (&fit.report.nuisance_rows, &fit.report.svm_rows);
        assert_eq!(nu.len(), n / 2);
        assert!(nu.iter().all(|i| !sv.contains(i)));
        let mut all: Vec<usize> = nu.iter().chain(sv).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn plug_in_rule_follows_the_sign_of_its_own_bayes_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (seed, bound) in [(1, BoundMethod::BalkePearl), (2, BoundMethod::Siddique)] {
        let s = Support::random(8, &mut rng);
        let t = s.sample(300, &mut rng);
        let cfg = PipelineConfig { bound, delta: 0.05, ..forest_cfg(seed) };
        let fit = fit_plug_in(&t, &cfg).unwrap();
        let model = Arc::new(fit_nuisance(&t, &cfg).unwrap());
        let ivs = estimate_intervals(&model, t.x().view(), bound, cfg.delta).unwrap();
        assert!(matches!(fit.rule, TreatmentRule::PlugIn(_)));
        for (iv, sg) in ivs.iter().zip(fit.rule.signs(t.x().view())) {
            if eta(iv) != 0.0 {
                assert_eq!(bayes_sign(iv), sg);
            }
        }
    }
}

#[test]
fn every_method_is_reproducible_from_its_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = Support::random(5, &mut rng);
    let t = s.sample(120, &mut rng);
    let cfg = forest_cfg(9);
    for m in [Method::IvPile, Method::IvPileSplit, Method::PlugIn, Method::Owl, Method::CoinFlip] {
        let (a, b) = (m.fit(&t, &cfg).unwrap(), m.fit(&t, &cfg).unwrap());
        assert_eq!(a.rule.decisions(t.x().view()), b.rule.decisions(t.x().view()), "{}", m.name());
    }
}
