//! Random weighted SVM instances and a brute-force primal minimizer.

use ivpile::transform::{LatentClass, WeightedLabel};
use ivpile::wsvm::{gram, solve_dual, train_wsvm, KernelSpec, SolverOptions, TreatmentRule};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub xs: Array2<f64>,
    pub w: Vec<f64>,
    pub e: Vec<f64>,
    pub lambda: f64,
}

pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize, w_max: f64, lambda: (f64, f64)) -> Instance {
    let xs = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let mut w: Vec<f64> =
        (0..n).map(|_| if rng.random_range(0..10) == 0 { 0.0 } else { rng.random_range(0.05..w_max) }).collect();
    let mut e: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    // Both labels among the weighted points, so the intercept is determined.
    for (i, s) in [(0, 1.0), (n - 1, -1.0)] {
        e[i] = s;
        w[i] = w[i].max(0.05);
    }
    let (lo, hi): (f64, f64) = lambda;
    let lambda = (rng.random_range(lo.ln()..hi.ln())).exp();
    Instance { xs, w, e, lambda }
}

pub fn labels(inst: &Instance) -> Vec<WeightedLabel> {
    inst.w.iter().zip(&inst.e).map(|(&w, &e)| WeightedLabel { w, e, latent: LatentClass::Unlabeled }).collect()
}

pub fn primal(xs: ArrayView2<f64>, w: &[f64], e: &[f64], lambda: f64, beta: &[f64], beta0: f64) -> f64 {
    let n = w.len() as f64;
    let hinge: f64 = xs
        .rows()
        .into_iter()
        .zip(w.iter().zip(e))
        .map(|(x, (&w, &e))| {
            let f: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + beta0;
            w * (1.0 + e * f).max(0.0)
        })
        .sum();
    hinge + 0.5 * n * lambda * beta.iter().map(|b| b * b).sum::<f64>()
}

/// Minimize the linear-kernel primal over `(beta, beta0)` by a coarse grid and successive
/// zoomed grids around the incumbent.
pub fn grid_minimize(inst: &Instance) -> (Vec<f64>, f64, f64) {
    let d = inst.xs.ncols();
    let dims = d + 1;
    let obj = |p: &[f64]| primal(inst.xs.view(), &inst.w, &inst.e, inst.lambda, &p[..d], p[d]);
    let mut best = vec![0.0; dims];
    let mut best_val = obj(&best);
    let (mut half, mut steps) = (6.0, 120usize);
    for _ in 0..14 {
        let center = best.clone();
        let h = 2.0 * half / steps as f64;
        let mut idx = vec![0usize; dims];
        loop {
            let p: Vec<f64> = (0..dims).map(|j| center[j] - half + h * idx[j] as f64).collect();
            let v = obj(&p);
            if v < best_val {
                best_val = v;
                best = p;
            }
            let mut j = 0;
            while j < dims {
                idx[j] += 1;
                if idx[j] <= steps {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == dims {
                break;
            }
        }
        half = 4.0 * h;
        steps = 16;
    }
    let beta0 = best[d];
    best.truncate(d);
    (best, beta0, best_val)
}

/// Solve `instances` random Gaussian-kernel problems with `2 <= n <= 50`; return the worst
/// relative gap and the worst equality residual, or a description of the first invalid solution.
pub fn certify(instances: usize, seed: u64) -> Result<(f64, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gap, mut res) = (0.0f64, 0.0f64);
    for case in 0..instances {
        let n = rng.random_range(2..=50);
        let inst = random_instance(&mut rng, n, 3, 3.0, (1e-3, 10.0));
        let k = gram(&KernelSpec::Gaussian { sigma: 1.0 }, inst.xs.view(), inst.xs.view());
        let sol =
            solve_dual(&inst.w, &inst.e, &k, inst.lambda, &SolverOptions::default()).map_err(|e| e.to_string())?;
        if !sol.converged {
            return Err(format!("case {case} did not converge"));
        }
        if sol.q.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(format!("case {case} left the box"));
        }
        if inst.w.iter().zip(&sol.q).any(|(&w, &q)| w == 0.0 && q != 0.0) {
            return Err(format!("case {case} moved a zero-weight point"));
        }
        gap = gap.max(sol.gap);
        res = res.max(sol.equality_residual(&inst.w, &inst.e).abs());
    }
    Ok((gap, res))
}

/// Linear-kernel problems with `n <= 5`: compare the solver's decision values with the grid
/// minimizer of the primal. Returns the number of instances in full agreement.
pub fn primal_agreement(instances: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolverOptions { tol: 1e-10, max_iter: None };
    let mut agree = 0;
    for case in 0..instances {
        let n = rng.random_range(2..=5);
        let d = if case % 2 == 0 { 1 } else { 2 };
        let inst = random_instance(&mut rng, n, d, 1.0, (0.5, 2.0));
        let fit = train_wsvm(inst.xs.view(), &labels(&inst), KernelSpec::Linear, inst.lambda, &opts)
            .map_err(|e| e.to_string())?;
        let TreatmentRule::KernelExpansion(k) = &fit.rule else {
            return Err("kernel rule expected".into());
        };
        let beta: Vec<f64> =
            (0..d).map(|j| k.alphas.iter().zip(k.support.column(j)).map(|(a, x)| a * x).sum()).collect();
        let solver_val = primal(inst.xs.view(), &inst.w, &inst.e, inst.lambda, &beta, k.beta0);
        let (gb, gb0, grid_val) = grid_minimize(&inst);
        let ours = fit.rule.decisions(inst.xs.view());
        let values_ok = solver_val <= grid_val + 1e-6 * (1.0 + grid_val);
        let rows_ok = inst.xs.rows().into_iter().zip(&ours).all(|(x, &f)| {
            let g: f64 = x.iter().zip(&gb).map(|(a, b)| a * b).sum::<f64>() + gb0;
            (g - f).abs() < 1e-2 && (g.abs() <= 1e-2 || (g > 0.0) == (f > 0.0))
        });
        if values_ok && rows_ok {
            agree += 1;
        }
    }
    Ok(agree)
}
