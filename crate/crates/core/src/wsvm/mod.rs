//! Weighted kernel SVM: Gram matrices, the dual solver, rules and tuning.

pub mod cv;
pub mod kernel;
pub mod rule;
pub mod smo;

use ndarray::{ArrayView2, Axis};

pub use cv::{cross_validate, cross_validate_owl, grid_search, log_grid, CvResult, CvScore, FoldProblem, TuningGrid};
pub use kernel::{gram, KernelSpec};
pub use rule::{plug_in_value, KernelExpansion, PlugInRule, TreatmentRule};
pub use smo::{recover_intercept, solve_dual, DualSolution, SolverOptions};

use crate::error::{Error, Result};
use crate::transform::WeightedLabel;

#[derive(Debug, Clone)]
pub struct WsvmFit {
    pub rule: TreatmentRule,
    pub solution: DualSolution,
}

/// Coefficients `α_i = −q_i w_i e_i / (nλ)` of the kernel expansion.
pub fn expansion_coefficients(q: &[f64], w: &[f64], e: &[f64], lambda: f64) -> Vec<f64> {
    let s = 1.0 / (q.len() as f64 * lambda);
    (0..q.len()).map(|i| -q[i] * w[i] * e[i] * s).collect()
}

pub fn train_wsvm(
    xs: ArrayView2<f64>,
    labels: &[WeightedLabel],
    kernel: KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<WsvmFit> {
    if xs.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::arg("covariates and labels must have the same nonzero length"));
    }
    let w: Vec<f64> = labels.iter().map(|l| l.w).collect();
    let e: Vec<f64> = labels.iter().map(|l| l.e).collect();
    let k = gram(&kernel, xs, xs);
    let solution = solve_dual(&w, &e, &k, lambda, opts)?;
    let coef = expansion_coefficients(&solution.q, &w, &e, lambda);
    let keep: Vec<usize> = (0..coef.len()).filter(|&i| coef[i] != 0.0).collect();
    let rule = TreatmentRule::KernelExpansion(KernelExpansion {
        support: xs.select(Axis(0), &keep),
        alphas: keep.iter().map(|&i| coef[i]).collect(),
        beta0: solution.beta0,
        kernel,
    });
    Ok(WsvmFit { rule, solution })
}
