//! Worst-case risk: decomposition, Bayes optimality, the excess-risk identity, the sandwich
//! around the true risk, the min-max reading, and surrogate dominance.

mod common;

use common::{bayes_beats_every_assignment, config, eight, interval, simplex, table_from_types, CASES};
use ivpile::bounds::{balke_pearl, Interval};
use ivpile::risk::{benchmark_risk, risk_upper_of_signs, weighted_misclassification_signs};
use ivpile::transform::{bayes_sign, eta, sgn, surrogate_loss, SgnConvention};
use proptest::prelude::*;

fn sign() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(-1.0)]
}

fn rows(max: usize) -> impl Strategy<Value = Vec<(Interval, f64)>> {
    proptest::collection::vec((interval(), sign()), 1..=max)
}

/// Rows drawn from response-type mixtures: sharp interval and the true effect it must contain.
fn oracle_rows(max: usize) -> impl Strategy<Value = Vec<(Interval, f64, f64)>> {
    proptest::collection::vec((simplex(16), sign()), 1..=max).prop_map(|v| {
        v.into_iter()
            .map(|(q, s)| {
                let (t, effect) = table_from_types(&q);
                (balke_pearl(&eight(&t)).unwrap(), effect, s)
            })
            .collect()
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

proptest! {
    #![proptest_config(config(CASES))]

    #[test]
    fn risk_splits_into_labeled_and_unlabeled_parts(r in rows(30)) {
        let (ivs, signs): (Vec<Interval>, Vec<f64>) = r.into_iter().unzip();
        let rep = risk_upper_of_signs(&signs, &ivs).unwrap();
        prop_assert!((rep.r_upper - rep.r_label - rep.r_unlabel).abs() < 1e-10);
    }

    #[test]
    fn excess_risk_is_the_disagreement_weighted_by_eta(r in rows(30)) {
        let (ivs, signs): (Vec<Interval>, Vec<f64>) = r.into_iter().unzip();
        let bayes: Vec<f64> = ivs.iter().map(bayes_sign).collect();
        let lhs = risk_upper_of_signs(&signs, &ivs).unwrap().r_upper
            - risk_upper_of_signs(&bayes, &ivs).unwrap().r_upper;
        let rhs = mean(ivs.iter().zip(&signs).zip(&bayes).map(|((iv, s), b)| {
            if s != b { eta(iv).abs() } else { 0.0 }
        }));
        prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn worst_case_risk_sandwiches_the_true_risk(r in oracle_rows(20)) {
        let ivs: Vec<Interval> = r.iter().map(|x| x.0).collect();
        let cate: Vec<f64> = r.iter().map(|x| x.1).collect();
        let signs: Vec<f64> = r.iter().map(|x| x.2).collect();
        let upper = risk_upper_of_signs(&signs, &ivs).unwrap().r_upper;
        let truth = weighted_misclassification_signs(&signs, &cate).unwrap().mean;
        let width = mean(ivs.iter().map(Interval::width));
        prop_assert!(upper - truth >= -1e-12, "{upper} < {truth}");
        prop_assert!(upper - truth <= width + 1e-12, "{upper} - {truth} > {width}");
    }

    #[test]
    fn surrogate_excess_dominates_worst_case_excess(
        r in proptest::collection::vec((interval(), -3.0f64..3.0), 1..=30),
    ) {
        let ivs: Vec<Interval> = r.iter().map(|x| x.0).collect();
        let f: Vec<f64> = r.iter().map(|x| x.1).collect();
        let star: Vec<f64> = ivs.iter().map(bayes_sign).collect();
        let surr = |g: &[f64]| mean(ivs.iter().zip(g).map(|(iv, &v)| surrogate_loss(iv, v)));
        let signs: Vec<f64> = f.iter().map(|&v| sgn(v)).collect();
        let excess = risk_upper_of_signs(&signs, &ivs).unwrap().r_upper
            - risk_upper_of_signs(&star, &ivs).unwrap().r_upper;
        prop_assert!(surr(&f) - surr(&star) >= excess - 1e-12);
    }

    #[test]
    fn benchmark_gaps_are_consistent(
        r in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, sign()), 1..=30),
    ) {
        let cate: Vec<f64> = r.iter().map(|x| x.0).collect();
        let cate_x: Vec<f64> = r.iter().map(|x| x.1).collect();
        let signs: Vec<f64> = r.iter().map(|x| x.2).collect();
        let b = benchmark_risk(&signs, &cate, &cate_x).unwrap();
        prop_assert!((b.vs_opt.mean - (b.vs_omni.mean - b.c_dgp)).abs() < 1e-10);
    }
}

/// The pointwise worst case equals the largest risk over effect functions between the bounds.
#[test]
fn worst_case_risk_is_a_max_over_effects_between_the_bounds() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let k = rng.random_range(1..=6usize);
        let ivs: Vec<Interval> = (0..k)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                Interval::new(a.min(b), a.max(b)).unwrap()
            })
            .collect();
        let signs: Vec<f64> = (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        const G: usize = 6;
        let grid = |iv: &Interval, j: usize| iv.l + (iv.u - iv.l) * j as f64 / (G - 1) as f64;
        let mut best = f64::NEG_INFINITY;
        for code in 0..G.pow(k as u32) {
            let mut c = code;
            let mut risk = 0.0;
            for (iv, &s) in ivs.iter().zip(&signs) {
                let effect = grid(iv, c % G);
                c /= G;
                if SgnConvention::bayes(effect) != s {
                    risk += effect.abs();
                }
            }
            best = best.max(risk / k as f64);
        }
        let upper = risk_upper_of_signs(&signs, &ivs).unwrap().r_upper;
        assert!((upper - best).abs() < 1e-12, "{upper} vs {best}");
    }
}

#[test]
fn bayes_sign_beats_every_assignment_on_small_supports() {
    assert_eq!(bayes_beats_every_assignment(100, 6), 100);
}

#[test]
fn bayes_rule_beats_both_constant_rules() {
    let ivs = [(0.1, 0.5), (-0.7, -0.2), (-0.3, 0.6), (-0.5, 0.2)].map(|(l, u)| Interval::new(l, u).unwrap());
    let bayes: Vec<f64> = ivs.iter().map(bayes_sign).collect();
    let r = |s: &[f64]| risk_upper_of_signs(s, &ivs).unwrap().r_upper;
    assert!(r(&bayes) <= r(&[1.0; 4]) && r(&bayes) <= r(&[-1.0; 4]));
    let plus = [Interval::new(1.0, 3.0).unwrap(); 3];
    assert_eq!(risk_upper_of_signs(&[1.0; 3], &plus).unwrap().r_upper, 0.0);
}
