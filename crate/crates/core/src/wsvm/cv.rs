//! K-fold selection of the penalty and the Gaussian bandwidth.

use ndarray::Axis;

use super::kernel::{gram, KernelSpec};
use super::smo::{solve_dual, SolverOptions};
use crate::bounds::estimate_intervals;
use crate::data::{make_folds, ObservationTable};
use crate::error::{Error, Result};
use crate::estimators::{fit_nuisance, fit_propensity, ipw_contrasts, owl_labels, PipelineConfig};
use crate::rng;
use crate::transform::{sgn, sup_loss, weight_label};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvScore {
    pub lambda: f64,
    pub sigma: f64,
    /// Mean held-out loss, pooled over folds.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda: f64,
    pub sigma: f64,
    pub scores: Vec<CvScore>,
}

/// `points` values spaced evenly in log10 between `min` and `max` inclusive.
pub fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && points >= 1) {
        return Err(Error::arg("log grid needs 0 < min <= max and at least one point"));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.log10(), max.log10());
    Ok((0..points).map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64)).collect())
}

/// Candidate `λ` and `σ` values and the fold count.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    pub lambdas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub folds: usize,
}

impl TuningGrid {
    /// Seven decades `10^-3 … 10^3` for both parameters with 5 folds.
    pub fn decades() -> Self {
        let g = log_grid(1e-3, 1e3, 7).expect("valid grid");
        TuningGrid { lambdas: g.clone(), sigmas: g, folds: 5 }
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// One fold's training problem and the held-out loss of each decision.
#[derive(Debug, Clone)]
pub struct FoldProblem {
    pub w: Vec<f64>,
    pub e: Vec<f64>,
    /// `[loss if −1, loss if +1]` per held-out row.
    pub held_loss: Vec<[f64; 2]>,
}

/// Grid search over `(λ, σ)` with a caller-supplied fold problem built from
/// `(train fold, held-out fold, fold seed)`. Ties go to the smallest `λ`, then the smallest `σ`.
pub fn grid_search(
    table: &ObservationTable,
    lambda_grid: &[f64],
    sigma_grid: &[f64],
    k: usize,
    seed: u64,
    solver: &SolverOptions,
    build: impl Fn(&ObservationTable, &ObservationTable, u64) -> Result<FoldProblem>,
) -> Result<CvResult> {
    if lambda_grid.is_empty() || sigma_grid.is_empty() {
        return Err(Error::arg("tuning grids must be nonempty"));
    }
    let lambdas = sorted(lambda_grid);
    let sigmas = sorted(sigma_grid);
    let kernels: Vec<KernelSpec> = sigmas.iter().map(|&s| KernelSpec::gaussian(s)).collect::<Result<_>>()?;
    let folds = make_folds(table, k, rng::derive_seed(seed, rng::label::FOLDS))?;
    let mut loss_sum = vec![vec![0.0; sigmas.len()]; lambdas.len()];

    for fold in 0..k {
        let train = table.subset(&folds.rows_outside(fold));
        let held = table.subset(&folds.rows_in(fold));
        let p = build(&train, &held, rng::derive_seed(seed, fold as u64))?;
        if p.w.len() != train.n() || p.e.len() != train.n() || p.held_loss.len() != held.n() {
            return Err(Error::State("fold problem does not match the fold sizes".into()));
        }
        for (si, kernel) in kernels.iter().enumerate() {
            let k_train = gram(kernel, train.x().view(), train.x().view());
            let k_held = gram(kernel, held.x().view(), train.x().view());
            for (li, &lambda) in lambdas.iter().enumerate() {
                let sol = solve_dual(&p.w, &p.e, &k_train, lambda, solver)?;
                let coef = super::expansion_coefficients(&sol.q, &p.w, &p.e, lambda);
                let loss: f64 = k_held
                    .axis_iter(Axis(0))
                    .zip(&p.held_loss)
                    .map(|(row, l)| {
                        let f = sol.beta0 + row.iter().zip(&coef).map(|(kv, c)| kv * c).sum::<f64>();
                        if sgn(f) > 0.0 {
                            l[1]
                        } else {
                            l[0]
                        }
                    })
                    .sum();
                loss_sum[li][si] += loss;
            }
        }
    }

    let n = table.n() as f64;
    let mut scores = Vec::with_capacity(lambdas.len() * sigmas.len());
    let mut best: Option<CvScore> = None;
    for (li, &lambda) in lambdas.iter().enumerate() {
        for (si, &sigma) in sigmas.iter().enumerate() {
            let s = CvScore { lambda, sigma, score: loss_sum[li][si] / n };
            if best.is_none_or(|b| s.score < b.score) {
                best = Some(s);
            }
            scores.push(s);
        }
    }
    let best = best.expect("grids are nonempty");
    Ok(CvResult { lambda: best.lambda, sigma: best.sigma, scores })
}

fn require_gaussian(cfg: &PipelineConfig) -> Result<()> {
    if !matches!(cfg.kernel, KernelSpec::Gaussian { .. }) {
        return Err(Error::arg("cross-validation tunes the Gaussian kernel bandwidth"));
    }
    Ok(())
}

/// IV-PILE tuning: nuisance refit on each training fold; the score is the held-out worst-case
/// loss on intervals from that fold's nuisance model.
pub fn cross_validate(
    table: &ObservationTable,
    cfg: &PipelineConfig,
    lambda_grid: &[f64],
    sigma_grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    require_gaussian(cfg)?;
    grid_search(table, lambda_grid, sigma_grid, k, seed, &cfg.solver, |train, held, fold_seed| {
        let model = fit_nuisance(train, &PipelineConfig { seed: fold_seed, ..*cfg })?;
        let train_iv = estimate_intervals(&model, train.x().view(), cfg.bound, cfg.delta)?;
        let held_iv = estimate_intervals(&model, held.x().view(), cfg.bound, cfg.delta)?;
        let labels: Vec<_> = train_iv.iter().map(weight_label).collect();
        Ok(FoldProblem {
            w: labels.iter().map(|l| l.w).collect(),
            e: labels.iter().map(|l| l.e).collect(),
            held_loss: held_iv.iter().map(|iv| [sup_loss(iv, -1.0), sup_loss(iv, 1.0)]).collect(),
        })
    })
}

/// OWL tuning: propensity refit on each training fold; the score is the held-out inverse-weighted
/// misclassification `|Ĉ|·1{sgn f ≠ sgn Ĉ}` with held-out contrasts from the same propensity model.
pub fn cross_validate_owl(
    table: &ObservationTable,
    cfg: &PipelineConfig,
    lambda_grid: &[f64],
    sigma_grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    require_gaussian(cfg)?;
    grid_search(table, lambda_grid, sigma_grid, k, seed, &cfg.solver, |train, held, fold_seed| {
        let prop = fit_propensity(train, &cfg.estimator, fold_seed)?;
        let labels = owl_labels(&ipw_contrasts(&prop, train));
        Ok(FoldProblem {
            w: labels.iter().map(|l| l.w).collect(),
            e: labels.iter().map(|l| l.e).collect(),
            held_loss: ipw_contrasts(&prop, held).iter().map(|&c| if c > 0.0 { [c, 0.0] } else { [0.0, -c] }).collect(),
        })
    })
}
