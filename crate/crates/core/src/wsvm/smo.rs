//! Dual of the weighted hinge-loss kernel machine, solved by sequential minimal optimization.
//!
//! Primal: `min_f Σ w_i (1 + e_i f(x_i))^+ + (nλ/2)‖h‖²` with `f = h + β0`.
//! Dual in `q ∈ [0,1]^n`: `max Σ w_i q_i − ½ qᵀDq` subject to `Σ q_i w_i e_i = 0`,
//! `D_ij = w_i w_j e_i e_j K_ij / (nλ)`. The solver works with `α_i = q_i w_i ∈ [0, w_i]`
//! and labels `y_i = −e_i`, which is the same problem in the usual C-SVM layout.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg;

/// Largest problem whose Gram matrix is certified positive semidefinite before solving.
pub const PSD_CHECK_MAX_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target relative duality gap.
    pub tol: f64,
    /// Pair updates allowed; `None` means `10·n²`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-6, max_iter: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub q: Vec<f64>,
    pub beta0: f64,
    pub objective_dual: f64,
    pub objective_primal: f64,
    /// `(P − D) / max(|P|, |D|)`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Every weight was zero; the solution is the zero function.
    pub zero_rule: bool,
}

impl DualSolution {
    /// `Σ q_i w_i e_i`.
    pub fn equality_residual(&self, w: &[f64], e: &[f64]) -> f64 {
        self.q.iter().zip(w).zip(e).map(|((q, w), e)| q * w * e).sum()
    }
}

/// `g(x_i) = −(1/(nλ)) Σ_j q_j w_j e_j K(x_j, x_i)` for every row of `k`.
pub fn kernel_part(q: &[f64], w: &[f64], e: &[f64], k: &Array2<f64>, lambda: f64) -> Vec<f64> {
    let n = q.len();
    let s = 1.0 / (n as f64 * lambda);
    let coef: Vec<f64> = (0..n).map(|j| -q[j] * w[j] * e[j] * s).collect();
    (0..k.nrows())
        .map(|i| {
            let row = k.row(i);
            coef.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| c * row[j]).sum()
        })
        .collect()
}

/// Intercept minimizing `Σ w_i (1 + e_i (g_i + β0))^+` given the kernel part `g`.
///
/// Uses the mean over free points (`w_i > 0`, `0 < q_i < 1`) when any exist, otherwise the
/// exact minimizer of the piecewise-linear objective.
pub fn intercept_from_parts(q: &[f64], w: &[f64], e: &[f64], g: &[f64]) -> f64 {
    let free: Vec<usize> = (0..q.len()).filter(|&i| w[i] > 0.0 && q[i] > 0.0 && q[i] < 1.0).collect();
    if !free.is_empty() {
        return free.iter().map(|&i| -e[i] - g[i]).sum::<f64>() / free.len() as f64;
    }
    hinge_minimizer(w, e, g)
}

/// Exact minimizer over `b` of `Σ w_i (1 − y_i (g_i + b))^+` with `y_i = −e_i`.
pub fn hinge_minimizer(w: &[f64], e: &[f64], g: &[f64]) -> f64 {
    // Term i is active left of its breakpoint when y_i = +1 and right of it when y_i = -1.
    let mut pts: Vec<(f64, f64)> = (0..w.len()).filter(|&i| w[i] > 0.0).map(|i| (-e[i] - g[i], w[i])).collect();
    if pts.is_empty() {
        return 0.0;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let w_plus: f64 = (0..w.len()).filter(|&i| w[i] > 0.0 && e[i] < 0.0).map(|i| w[i]).sum();
    let mut slope = -w_plus;
    if slope >= 0.0 {
        return pts[0].0;
    }
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let tiny = 1e-14 * total;
    for k in 0..pts.len() {
        slope += pts[k].1;
        if slope > tiny {
            return pts[k].0;
        }
        if slope >= -tiny {
            // Flat stretch: take its midpoint when it is bounded.
            return match pts.get(k + 1) {
                Some(next) => 0.5 * (pts[k].0 + next.0),
                None => pts[k].0,
            };
        }
    }
    pts[pts.len() - 1].0
}

/// Intercept recovery from a dual solution.
pub fn recover_intercept(q: &[f64], w: &[f64], e: &[f64], k: &Array2<f64>, lambda: f64) -> f64 {
    let g = kernel_part(q, w, e, k, lambda);
    intercept_from_parts(q, w, e, &g)
}

struct Objectives {
    primal: f64,
    dual: f64,
}

fn objectives(alpha: &[f64], c: &[f64], y: &[f64], g: &[f64], b: f64) -> Objectives {
    let mut hinge = 0.0;
    let mut quad = 0.0;
    let mut lin = 0.0;
    for i in 0..alpha.len() {
        hinge += c[i] * (1.0 - y[i] * (g[i] + b)).max(0.0);
        quad += alpha[i] * y[i] * g[i];
        lin += alpha[i];
    }
    Objectives { primal: hinge + 0.5 * quad, dual: lin - 0.5 * quad }
}

fn relative_gap(o: &Objectives) -> f64 {
    let den = o.primal.abs().max(o.dual.abs());
    if den == 0.0 {
        0.0
    } else {
        ((o.primal - o.dual) / den).max(0.0)
    }
}

pub fn solve_dual(w: &[f64], e: &[f64], k: &Array2<f64>, lambda: f64, opts: &SolverOptions) -> Result<DualSolution> {
    let n = w.len();
    if e.len() != n || k.nrows() != n || k.ncols() != n {
        return Err(Error::arg("weights, labels and Gram matrix disagree in size"));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::arg(format!("lambda must be positive, got {lambda}")));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::arg("weights must be finite and nonnegative"));
    }
    if e.iter().any(|v| *v != 1.0 && *v != -1.0) {
        return Err(Error::arg("labels must be -1 or +1"));
    }

    let active: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    if active.is_empty() {
        return Ok(DualSolution {
            q: vec![0.0; n],
            beta0: 0.0,
            objective_dual: 0.0,
            objective_primal: 0.0,
            gap: 0.0,
            iterations: 0,
            converged: true,
            zero_rule: true,
        });
    }
    let m = active.len();
    let kk = Array2::from_shape_fn((m, m), |(a, b)| k[[active[a], active[b]]]);
    if m <= PSD_CHECK_MAX_ROWS {
        let maxdiag = (0..m).map(|i| kk[[i, i]]).fold(1.0, f64::max);
        if !linalg::is_psd(&kk, 1e-8 * maxdiag) {
            return Err(Error::Numerical("Gram matrix is not positive semidefinite".into()));
        }
    }

    let s = 1.0 / (n as f64 * lambda);
    let c: Vec<f64> = active.iter().map(|&i| w[i]).collect();
    let y: Vec<f64> = active.iter().map(|&i| -e[i]).collect();
    let qd: Vec<f64> = (0..m).map(|i| kk[[i, i]] * s).collect();
    let mut alpha = vec![0.0; m];
    let mut grad = vec![-1.0; m];
    let max_iter = opts.max_iter.unwrap_or(10 * n * n).max(1);

    let kernel_part_of = |alpha: &[f64]| -> Vec<f64> {
        let coef: Vec<f64> = (0..m).map(|j| alpha[j] * y[j] * s).collect();
        (0..m)
            .map(|i| {
                let row = kk.row(i);
                coef.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| v * row[j]).sum()
            })
            .collect()
    };
    let evaluate = |alpha: &[f64]| -> (f64, Objectives, Vec<f64>) {
        let g = kernel_part_of(alpha);
        let q: Vec<f64> = (0..m).map(|i| alpha[i] / c[i]).collect();
        let e_act: Vec<f64> = y.iter().map(|v| -v).collect();
        let b = intercept_from_parts(&q, &c, &e_act, &g);
        let o = objectives(alpha, &c, &y, &g, b);
        (b, o, g)
    };

    let mut eps = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let (beta0, obj) = loop {
        // Maximal violating pair.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..m {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c[t]) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c[t]);
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let stalled = i == usize::MAX || j == usize::MAX || gmax - gmin <= eps;
        if stalled || iterations >= max_iter {
            // Refresh the gradient to shed accumulated rounding, then certify.
            let g = kernel_part_of(&alpha);
            for t in 0..m {
                grad[t] = y[t] * g[t] - 1.0;
            }
            let (b, o, _) = evaluate(&alpha);
            if relative_gap(&o) <= opts.tol {
                converged = true;
                break (b, o);
            }
            if iterations >= max_iter || eps < 1e-14 {
                break (b, o);
            }
            if stalled {
                eps *= 0.1;
            }
            continue;
        }
        iterations += 1;

        let kij = kk[[i, j]] * s;
        let (ci, cj) = (c[i], c[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * kij).max(1e-12);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * kij).max(1e-12);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (ri, rj) = (kk.row(i), kk.row(j));
        for t in 0..m {
            grad[t] += y[t] * s * (y[i] * ri[t] * di + y[j] * rj[t] * dj);
        }
    };

    let mut q = vec![0.0; n];
    for (a, &i) in active.iter().enumerate() {
        q[i] = (alpha[a] / c[a]).clamp(0.0, 1.0);
    }
    Ok(DualSolution {
        q,
        beta0,
        objective_dual: obj.dual,
        objective_primal: obj.primal,
        gap: relative_gap(&obj),
        iterations,
        converged,
        zero_rule: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn symmetric_pair_has_zero_intercept() {
        let k = array![[1.0, -1.0], [-1.0, 1.0]];
        let sol = solve_dual(&[1.0, 1.0], &[1.0, -1.0], &k, 1.0, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.beta0.abs() < 1e-9);
        // Decision values match the closed form: f(x1) = -f(x2).
        let g = kernel_part(&sol.q, &[1.0, 1.0], &[1.0, -1.0], &k, 1.0);
        assert!((g[0] + g[1]).abs() < 1e-12);
    }

    #[test]
    fn all_zero_weights_give_zero_rule() {
        let k = array![[1.0, 0.0], [0.0, 1.0]];
        let sol = solve_dual(&[0.0, 0.0], &[1.0, -1.0], &k, 1.0, &SolverOptions::default()).unwrap();
        assert!(sol.zero_rule && sol.gap == 0.0 && sol.beta0 == 0.0);
    }

    #[test]
    fn indefinite_gram_is_rejected() {
        let k = array![[1.0, 2.0], [2.0, 1.0]];
        let err = solve_dual(&[1.0, 1.0], &[1.0, -1.0], &k, 1.0, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn single_point_intercept_sits_on_breakpoint() {
        // One labeled point with e = -1: minimizer puts f(x) at 1.
        let b = hinge_minimizer(&[1.0], &[-1.0], &[0.3]);
        assert!((b + 0.3 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn intercept_is_translation_equivariant() {
        let w = [1.0, 2.0, 0.5, 1.5];
        let e = [1.0, -1.0, 1.0, -1.0];
        let g = [0.2, -0.4, 1.1, 0.0];
        let q = [1.0, 1.0, 0.0, 1.0];
        let b = intercept_from_parts(&q, &w, &e, &g);
        let shifted: Vec<f64> = g.iter().map(|v| v + 0.75).collect();
        assert!((intercept_from_parts(&q, &w, &e, &shifted) - (b - 0.75)).abs() < 1e-12);
    }
}
