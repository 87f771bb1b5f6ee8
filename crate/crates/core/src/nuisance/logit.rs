//! Multinomial logistic regression fit by gradient descent with backtracking.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogitConfig {
    fn default() -> Self {
        LogitConfig { l2: 1e-4, max_iter: 500, tol: 1e-8 }
    }
}

/// Softmax-linear classifier. Features are standardized internally.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialLogit {
    pub(crate) center: Vec<f64>,
    pub(crate) scale: Vec<f64>,
    /// `n_classes × (d + 1)`; column 0 is the intercept.
    pub(crate) coef: Array2<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized objective after each accepted step, starting from the initial point.
    pub objective_trace: Vec<f64>,
}

pub(crate) fn standardization(features: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = features.nrows() as f64;
    let mut center = Vec::with_capacity(features.ncols());
    let mut scale = Vec::with_capacity(features.ncols());
    for col in features.axis_iter(Axis(1)) {
        let m = col.sum() / n;
        let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        center.push(m);
        scale.push(if v > 1e-24 { v.sqrt() } else { 1.0 });
    }
    (center, scale)
}

fn design(features: ArrayView2<f64>, center: &[f64], scale: &[f64]) -> Array2<f64> {
    let (n, d) = features.dim();
    let mut z = Array2::zeros((n, d + 1));
    for i in 0..n {
        z[[i, 0]] = 1.0;
        for j in 0..d {
            z[[i, j + 1]] = (features[[i, j]] - center[j]) / scale[j];
        }
    }
    z
}

fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

struct Problem<'a> {
    z: &'a Array2<f64>,
    classes: &'a [usize],
    l2: f64,
}

impl Problem<'_> {
    fn objective(&self, coef: &Array2<f64>) -> f64 {
        let n = self.z.nrows();
        let mut nll = 0.0;
        let mut eta = vec![0.0; coef.nrows()];
        for i in 0..n {
            let row = self.z.row(i);
            for (k, e) in eta.iter_mut().enumerate() {
                *e = coef.row(k).dot(&row);
            }
            let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
            nll += lse - eta[self.classes[i]];
        }
        let pen: f64 = coef.slice(ndarray::s![.., 1..]).iter().map(|w| w * w).sum();
        nll / n as f64 + 0.5 * self.l2 * pen
    }

    fn gradient(&self, coef: &Array2<f64>) -> Array2<f64> {
        let n = self.z.nrows();
        let mut g = Array2::<f64>::zeros(coef.dim());
        let mut p = vec![0.0; coef.nrows()];
        for i in 0..n {
            let row = self.z.row(i);
            for (k, e) in p.iter_mut().enumerate() {
                *e = coef.row(k).dot(&row);
            }
            softmax_in_place(&mut p);
            p[self.classes[i]] -= 1.0;
            for (k, pk) in p.iter().enumerate() {
                g.row_mut(k).scaled_add(*pk, &row);
            }
        }
        g /= n as f64;
        let mut pen = coef.clone();
        pen.column_mut(0).fill(0.0);
        g.scaled_add(self.l2, &pen);
        g
    }
}

pub fn fit_multinomial_logit(
    features: ArrayView2<f64>,
    classes: &[usize],
    n_classes: usize,
    config: &LogitConfig,
) -> Result<MultinomialLogit> {
    if features.nrows() != classes.len() || classes.is_empty() {
        return Err(Error::arg("features and classes must have the same nonzero length"));
    }
    if classes.iter().any(|&c| c >= n_classes) {
        return Err(Error::arg("class index out of range"));
    }
    let first = classes[0];
    if classes.iter().all(|&c| c == first) {
        return Err(Error::DegenerateFit(format!("only class {first} present")));
    }
    let (center, scale) = standardization(features);
    let z = design(features, &center, &scale);
    let prob = Problem { z: &z, classes, l2: config.l2 };

    let mut coef = Array2::<f64>::zeros((n_classes, z.ncols()));
    let mut f = prob.objective(&coef);
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let g = prob.gradient(&coef);
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if gnorm2.sqrt() <= config.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = coef.clone();
            trial.scaled_add(-step, &g);
            let ft = prob.objective(&trial);
            if ft <= f - 0.5 * step * gnorm2 {
                coef = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(f);
        step *= 2.0;
    }
    Ok(MultinomialLogit { center, scale, coef, converged, iterations, objective_trace: trace })
}

impl MultinomialLogit {
    pub fn n_classes(&self) -> usize {
        self.coef.nrows()
    }

    pub fn predict_proba(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let mut eta: Vec<f64> = (0..self.coef.nrows())
            .map(|k| {
                let c = self.coef.row(k);
                c[0] + (0..x.len()).map(|j| c[j + 1] * (x[j] - self.center[j]) / self.scale[j]).sum::<f64>()
            })
            .collect();
        softmax_in_place(&mut eta);
        eta
    }
}

/// Ridge-stabilized least squares, used as the linear counterpart of the forest regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegression {
    pub(crate) center: Vec<f64>,
    pub(crate) scale: Vec<f64>,
    pub(crate) coef: Vec<f64>,
    pub(crate) range: (f64, f64),
}

pub fn fit_linear_regression(features: ArrayView2<f64>, targets: &[f64], ridge: f64) -> Result<LinearRegression> {
    let n = features.nrows();
    if n < 2 || targets.len() != n {
        return Err(Error::arg("linear regression needs at least two rows and matching targets"));
    }
    let (center, scale) = standardization(features);
    let z = design(features, &center, &scale);
    let p = z.ncols();
    let mut a = z.t().dot(&z);
    for j in 1..p {
        a[[j, j]] += ridge * n as f64;
    }
    a[[0, 0]] += 1e-12 * n as f64;
    let b = z.t().dot(&ndarray::ArrayView1::from(targets));
    let coef = crate::linalg::cholesky_solve(&a, b.as_slice().expect("contiguous"))
        .ok_or_else(|| Error::Numerical("normal equations are not positive definite".into()))?;
    let lo = targets.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(LinearRegression { center, scale, coef, range: (lo, hi) })
}

impl LinearRegression {
    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let v = self.coef[0]
            + (0..x.len()).map(|j| self.coef[j + 1] * (x[j] - self.center[j]) / self.scale[j]).sum::<f64>();
        v.clamp(self.range.0, self.range.1)
    }
}
