//! Shared generators and reference implementations for the integration suites.
#![allow(dead_code)]

pub mod qp;

use ivpile::bounds::{EightProbs, Interval};
use proptest::prelude::*;

/// Property suites run at least this many cases.
pub const CASES: u32 = 10_000;

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

/// Normalized vector of `k` positive weights (a flat Dirichlet draw up to the raw weights' law).
pub fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(1e-3f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// Random coherent probability table: each instrument arm is a point of the 4-simplex.
pub fn coherent_table() -> impl Strategy<Value = ([f64; 4], [f64; 4])> {
    (simplex(4), simplex(4)).prop_map(|(a, b)| (to4(&a), to4(&b)))
}

/// Table generated by a distribution over response types, so it satisfies the instrument model.
pub fn model_table() -> impl Strategy<Value = ([f64; 4], [f64; 4])> {
    simplex(16).prop_map(|q| table_from_types(&q).0)
}

pub fn to4(v: &[f64]) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

pub fn eight(t: &([f64; 4], [f64; 4])) -> EightProbs {
    EightProbs::from_arms(t.0, t.1).expect("coherent table")
}

/// Interval with endpoints in `[-2, 2]`, including degenerate and zero-touching ones.
pub fn interval() -> impl Strategy<Value = Interval> {
    prop_oneof![
        6 => (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| Interval::new(a.min(b), a.max(b)).unwrap()),
        1 => (-2.0f64..2.0).prop_map(|a| Interval::new(a, a).unwrap()),
        1 => (-2.0f64..2.0).prop_map(|a| Interval::new(a.min(0.0), a.max(0.0)).unwrap()),
        1 => (0.0f64..2.0).prop_map(|a| Interval::new(-a, a).unwrap()),
    ]
}

/// Response type `(a if z=+1, a if z=-1, y if a=+1, y if a=-1)`, index `t` in `0..16`.
pub fn response_type(t: usize) -> [i8; 4] {
    let s = |bit: usize| if (t >> bit) & 1 == 0 { 1 } else { -1 };
    [s(3), s(2), s(1), s(0)]
}

/// Observed table and average effect (probability scale) implied by a distribution over the
/// sixteen response types, with the instrument independent of the type.
pub fn table_from_types(q: &[f64]) -> (([f64; 4], [f64; 4]), f64) {
    let order = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
    let mut arms = [[0.0; 4]; 2];
    let mut effect = 0.0;
    for (t, &mass) in q.iter().enumerate() {
        let r = response_type(t);
        for (zi, z) in [1i8, -1].into_iter().enumerate() {
            let a = if z == 1 { r[0] } else { r[1] };
            let y = if a == 1 { r[2] } else { r[3] };
            let cell = order.iter().position(|&c| c == (y, a)).unwrap();
            arms[zi][cell] += mass;
        }
        effect += mass * (f64::from(u8::from(r[2] == 1)) - f64::from(u8::from(r[3] == 1)));
    }
    ((arms[0], arms[1]), effect)
}

fn solve_square(m: &mut [Vec<f64>], rhs: &mut [f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[piv][c].abs() < 1e-9 {
            return None;
        }
        m.swap(c, piv);
        rhs.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                if f != 0.0 {
                    for k in c..n {
                        m[r][k] -= f * m[c][k];
                    }
                    rhs[r] -= f * rhs[c];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Sharp effect bounds by brute force: the extreme average effects over every basic feasible
/// distribution of response types reproducing the table. Independent of any closed form.
pub fn lp_bounds(plus: [f64; 4], minus: [f64; 4]) -> (f64, f64) {
    let order = [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)];
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for (zi, (z, arm)) in [(1i8, plus), (-1i8, minus)].into_iter().enumerate() {
        for (k, &(y, a)) in order.iter().enumerate() {
            if zi == 1 && k == 3 {
                // Rank 7: the two arms share the total mass.
                continue;
            }
            rows.push(
                (0..16)
                    .map(|t| {
                        let r = response_type(t);
                        let at = if z == 1 { r[0] } else { r[1] };
                        let yt = if at == 1 { r[2] } else { r[3] };
                        f64::from(u8::from(at == a && yt == y))
                    })
                    .collect(),
            );
            rhs.push(arm[k]);
        }
    }
    let effect: Vec<f64> = (0..16)
        .map(|t| {
            let r = response_type(t);
            f64::from(u8::from(r[2] == 1)) - f64::from(u8::from(r[3] == 1))
        })
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut basis = [0usize; 7];
    combinations(16, 7, &mut basis, 0, 0, &mut |b| {
        let mut m: Vec<Vec<f64>> = rows.iter().map(|r| b.iter().map(|&j| r[j]).collect()).collect();
        let mut v = rhs.clone();
        if let Some(x) = solve_square(&mut m, &mut v) {
            if x.iter().all(|&xi| xi >= -1e-12) {
                let val: f64 = b.iter().zip(&x).map(|(&j, xi)| effect[j] * xi).sum();
                lo = lo.min(val);
                hi = hi.max(val);
            }
        }
    });
    (lo, hi)
}

fn combinations(n: usize, k: usize, buf: &mut [usize; 7], start: usize, depth: usize, f: &mut impl FnMut(&[usize])) {
    if depth == k {
        f(&buf[..k]);
        return;
    }
    for i in start..=n - (k - depth) {
        buf[depth] = i;
        combinations(n, k, buf, i + 1, depth + 1, f);
    }
}

/// Exhaustive check that the Bayes sign minimizes the worst-case risk on small discrete
/// supports: `instances` random supports of 1..=8 points with integer masses 1..=4 and random
/// intervals. Returns the number of instances where no sign assignment beats it.
pub fn bayes_beats_every_assignment(instances: usize, seed: u64) -> usize {
    use ivpile::risk::risk_upper_of_signs;
    use ivpile::transform::bayes_sign;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..instances {
        let k = rng.random_range(1..=8usize);
        let mut support = Vec::with_capacity(k);
        for _ in 0..k {
            let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let iv = match rng.random_range(0..4) {
                0 => Interval::new(-a.abs(), a.abs()).unwrap(),
                1 => Interval::new(a, a).unwrap(),
                _ => Interval::new(a.min(b), a.max(b)).unwrap(),
            };
            support.push((iv, rng.random_range(1..=4usize)));
        }
        let rows: Vec<Interval> = support.iter().flat_map(|&(iv, m)| std::iter::repeat_n(iv, m)).collect();
        let expand = |signs: &[f64]| -> Vec<f64> {
            support.iter().zip(signs).flat_map(|(&(_, m), &s)| std::iter::repeat_n(s, m)).collect()
        };
        let bayes: Vec<f64> = support.iter().map(|(iv, _)| bayes_sign(iv)).collect();
        let best = risk_upper_of_signs(&expand(&bayes), &rows).unwrap().r_upper;
        let beaten = (0..1u32 << k).any(|mask| {
            let signs: Vec<f64> = (0..k).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            risk_upper_of_signs(&expand(&signs), &rows).unwrap().r_upper < best - 1e-12
        });
        if !beaten {
            ok += 1;
        }
    }
    ok
}
