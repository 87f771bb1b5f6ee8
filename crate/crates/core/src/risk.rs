//! Risk functionals: the worst-case risk over the identified set with its labeled/unlabeled split,
//! weighted misclassification against the omniscient and the best covariate-only rules, and the
//! value gap between those two benchmarks.

use ndarray::ArrayView2;

use crate::bounds::Interval;
use crate::error::{Error, Result};
use crate::simlab::scenario::{SimScenario, DEFAULT_QUAD_NODES};
use crate::transform::{latent_class, sup_loss, LatentClass, SgnConvention};
use crate::wsvm::TreatmentRule;

/// Sample mean and its standard error `sd / √n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> MeanSe {
        let n = values.len();
        if n == 0 {
            return MeanSe { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se, n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub r_upper: f64,
    pub se_upper: f64,
    /// Contribution of rows whose interval excludes zero, averaged over all rows.
    pub r_label: f64,
    /// Contribution of rows whose interval covers zero, averaged over all rows.
    pub r_unlabel: f64,
    pub r_vs_omni: Option<f64>,
    pub r_vs_opt: Option<f64>,
    pub c_dgp: Option<f64>,
    pub n_eval: usize,
}

/// Worst-case risk of fixed decisions `signs` (in {-1, +1}) on the given intervals.
pub fn risk_upper_of_signs(signs: &[f64], intervals: &[Interval]) -> Result<RiskReport> {
    if signs.len() != intervals.len() || signs.is_empty() {
        return Err(Error::arg("decisions and intervals must have the same nonzero length"));
    }
    let n = signs.len() as f64;
    let losses: Vec<f64> = signs.iter().zip(intervals).map(|(&s, iv)| sup_loss(iv, s)).collect();
    let (mut label, mut unlabel) = (0.0, 0.0);
    for (loss, iv) in losses.iter().zip(intervals) {
        if latent_class(iv) == LatentClass::Unlabeled {
            unlabel += loss;
        } else {
            label += loss;
        }
    }
    let all = MeanSe::of(&losses);
    Ok(RiskReport {
        r_upper: all.mean,
        se_upper: all.se,
        r_label: label / n,
        r_unlabel: unlabel / n,
        r_vs_omni: None,
        r_vs_opt: None,
        c_dgp: None,
        n_eval: signs.len(),
    })
}

/// Mean over rows of `sup_loss(interval_i, sgn f(x_i))`.
pub fn empirical_risk_upper(rule: &TreatmentRule, xs: ArrayView2<f64>, intervals: &[Interval]) -> Result<RiskReport> {
    if xs.nrows() != intervals.len() {
        return Err(Error::arg("covariates and intervals must have the same number of rows"));
    }
    risk_upper_of_signs(&rule.signs(xs), intervals)
}

/// `|C|·1{sgn C ≠ s}` summarised over rows; a zero effect counts as favouring treatment.
pub fn weighted_misclassification_signs(signs: &[f64], cate: &[f64]) -> Result<MeanSe> {
    if signs.len() != cate.len() || signs.is_empty() {
        return Err(Error::arg("decisions and effects must have the same nonzero length"));
    }
    let v: Vec<f64> =
        signs.iter().zip(cate).map(|(&s, &c)| if SgnConvention::bayes(c) != s { c.abs() } else { 0.0 }).collect();
    Ok(MeanSe::of(&v))
}

/// Mean of `|CATE_i|·1{sgn CATE_i ≠ sgn f(x_i)}` over evaluation rows.
pub fn weighted_misclassification(rule: &TreatmentRule, xs: ArrayView2<f64>, cate: &[f64]) -> Result<f64> {
    if xs.nrows() != cate.len() {
        return Err(Error::arg("covariates and effects must have the same number of rows"));
    }
    Ok(weighted_misclassification_signs(&rule.signs(xs), cate)?.mean)
}

/// Benchmark-relative risks of decisions `signs` given per-row effects with and without the
/// hidden variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkRisk {
    /// `V(f_omni) − V(f)`.
    pub vs_omni: MeanSe,
    /// `V(f_opt) − V(f)`, computed directly from value differences.
    pub vs_opt: MeanSe,
    /// `V(f_omni) − V(f_opt)` on the same rows.
    pub c_dgp: f64,
}

pub fn benchmark_risk(signs: &[f64], cate: &[f64], cate_x: &[f64]) -> Result<BenchmarkRisk> {
    if cate_x.len() != cate.len() {
        return Err(Error::arg("effect columns must have the same length"));
    }
    let vs_omni = weighted_misclassification_signs(signs, cate)?;
    let treat = |s: f64| if s > 0.0 { 1.0 } else { 0.0 };
    let opt: Vec<f64> = cate
        .iter()
        .zip(cate_x)
        .zip(signs)
        .map(|((&c, &cx), &s)| c * (treat(SgnConvention::bayes(cx)) - treat(s)))
        .collect();
    Ok(BenchmarkRisk { vs_omni, vs_opt: MeanSe::of(&opt), c_dgp: c_dgp_rows(cate, cate_x) })
}

/// `mean |C_i|·1{sgn C_i ≠ sgn C(x_i)}`: what knowing the hidden variables is worth.
pub fn c_dgp_rows(cate: &[f64], cate_x: &[f64]) -> f64 {
    let n = cate.len() as f64;
    cate.iter()
        .zip(cate_x)
        .map(|(&c, &cx)| if SgnConvention::bayes(c) != SgnConvention::bayes(cx) { c.abs() } else { 0.0 })
        .sum::<f64>()
        / n
}

/// Monte Carlo estimate of the value gap between the omniscient and the best covariate-only rule.
pub fn c_dgp(scenario: &SimScenario, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::arg("c_dgp needs at least one Monte Carlo draw"));
    }
    let (table, oracle) = scenario.generate(n_mc, seed)?;
    let cate = oracle.cate_rows(table.x().view());
    let cate_x = oracle.cate_x_rows(table.x().view(), DEFAULT_QUAD_NODES);
    Ok(c_dgp_rows(&cate, &cate_x))
}
