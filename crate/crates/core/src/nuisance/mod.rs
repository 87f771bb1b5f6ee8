//! Nuisance models feeding the bound formulas.
//!
//! Binary outcomes use one 4-class model per instrument arm for the joint law of `(Y, A)`.
//! Bounded outcomes use per-cell regressions for `E[Y | Z, A, X]` plus `P(A | Z, X)` and `P(Z | X)`.

pub mod forest;
pub mod logit;

use ndarray::{ArrayView1, ArrayView2};

pub use forest::{ForestConfig, RandomForest};
pub use logit::{LinearRegression, LogitConfig, MultinomialLogit};

use crate::data::{ObservationTable, OutcomeKind};
use crate::error::{Error, Result};
use crate::rng;

/// Lower clip applied to estimated probabilities before they enter a bound.
pub const PROB_FLOOR: f64 = 1e-6;

/// Ridge used by the linear regression counterpart of the forest regressor.
const LINEAR_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    MultinomialLogit(LogitConfig),
    RandomForest(ForestConfig),
}

impl Default for EstimatorKind {
    fn default() -> Self {
        EstimatorKind::RandomForest(ForestConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Logit(MultinomialLogit),
    Forest(RandomForest),
}

impl Classifier {
    pub fn fit(
        kind: &EstimatorKind,
        features: ArrayView2<f64>,
        classes: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(match kind {
            EstimatorKind::MultinomialLogit(cfg) => {
                Classifier::Logit(logit::fit_multinomial_logit(features, classes, n_classes, cfg)?)
            }
            EstimatorKind::RandomForest(cfg) => {
                Classifier::Forest(forest::fit_classifier(features, classes, n_classes, cfg, seed)?)
            }
        })
    }

    pub fn predict_proba(&self, x: ArrayView1<f64>) -> Vec<f64> {
        match self {
            Classifier::Logit(m) => m.predict_proba(x),
            Classifier::Forest(f) => f.predict_proba(x),
        }
    }

    /// Whether `d` covariates are a valid input.
    pub fn accepts_dim(&self, d: usize) -> bool {
        match self {
            Classifier::Logit(m) => m.center.len() == d,
            Classifier::Forest(f) => f.max_feature().is_none_or(|j| j < d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Linear(LinearRegression),
    Forest(RandomForest),
}

impl Regressor {
    pub fn fit(kind: &EstimatorKind, features: ArrayView2<f64>, targets: &[f64], seed: u64) -> Result<Self> {
        if targets.len() == 1 {
            // A single observation pins the cell mean; no model can do better.
            let v = targets[0];
            return Ok(Regressor::Linear(LinearRegression {
                center: vec![0.0; features.ncols()],
                scale: vec![1.0; features.ncols()],
                coef: std::iter::once(v).chain(std::iter::repeat_n(0.0, features.ncols())).collect(),
                range: (v, v),
            }));
        }
        Ok(match kind {
            EstimatorKind::MultinomialLogit(_) => {
                Regressor::Linear(logit::fit_linear_regression(features, targets, LINEAR_RIDGE)?)
            }
            EstimatorKind::RandomForest(cfg) => Regressor::Forest(forest::fit_regressor(features, targets, cfg, seed)?),
        })
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        match self {
            Regressor::Linear(m) => m.predict(x),
            Regressor::Forest(f) => f.predict_value(x),
        }
    }

    pub fn accepts_dim(&self, d: usize) -> bool {
        match self {
            Regressor::Linear(m) => m.center.len() == d,
            Regressor::Forest(f) => f.max_feature().is_none_or(|j| j < d),
        }
    }
}

/// Clip every entry to `[floor, 1 - floor]` and renormalize.
pub fn floor_probs(p: &mut [f64]) {
    for v in p.iter_mut() {
        *v = v.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    }
    let s: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= s;
    }
}

/// Index of the `(y, a)` cell in the 4-class joint model: `(+,+), (+,-), (-,+), (-,-)`.
pub fn joint_class(y: f64, a: f64) -> usize {
    usize::from(y < 0.0) * 2 + usize::from(a < 0.0)
}

fn arm_index(z: f64) -> usize {
    usize::from(z < 0.0)
}

fn arm_name(z: f64) -> &'static str {
    if z > 0.0 {
        "z=+1"
    } else {
        "z=-1"
    }
}

/// Per-arm 4-class models of `(Y, A)` given `X`. Arm 0 is `Z = +1`, arm 1 is `Z = -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProbModel {
    pub(crate) arms: [Classifier; 2],
}

impl JointProbModel {
    pub fn from_classifiers(plus: Classifier, minus: Classifier) -> Self {
        JointProbModel { arms: [plus, minus] }
    }

    /// Floored and renormalized `p_{y,a|z,x}` for one arm in [`joint_class`] order.
    pub fn arm_probs(&self, z: f64, x: ArrayView1<f64>) -> [f64; 4] {
        let mut p = self.arms[arm_index(z)].predict_proba(x);
        floor_probs(&mut p);
        [p[0], p[1], p[2], p[3]]
    }

    pub fn eight_probs(&self, x: ArrayView1<f64>) -> crate::bounds::EightProbs {
        crate::bounds::EightProbs::from_arms_unchecked(self.arm_probs(1.0, x), self.arm_probs(-1.0, x))
    }
}

pub fn fit_joint_prob(table: &ObservationTable, kind: &EstimatorKind, seed: u64) -> Result<JointProbModel> {
    if table.outcome() != OutcomeKind::Binary {
        return Err(Error::arg("the joint probability model needs a binary outcome"));
    }
    let mut arms = Vec::with_capacity(2);
    for z in [1.0, -1.0] {
        let rows = table.arm_rows(z);
        if rows.is_empty() {
            return Err(Error::DegenerateFit(format!("instrument arm {} is empty", arm_name(z))));
        }
        let sub = table.subset(&rows);
        let classes: Vec<usize> = sub.y().iter().zip(sub.a()).map(|(&y, &a)| joint_class(y, a)).collect();
        let seed = rng::derive_seed(seed, rng::label::NUISANCE * 16 + arm_index(z) as u64);
        let clf = Classifier::fit(kind, sub.x().view(), &classes, 4, seed).map_err(|e| match e {
            Error::DegenerateFit(m) => Error::DegenerateFit(format!("instrument arm {}: {m}", arm_name(z))),
            other => other,
        })?;
        arms.push(clf);
    }
    let minus = arms.pop().expect("two arms");
    let plus = arms.pop().expect("two arms");
    Ok(JointProbModel { arms: [plus, minus] })
}

/// Nuisance values at one covariate point, in the form the Manski-Pepper bound consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpInputs {
    /// `mu[zi][ai]` = E[Y | Z=z, A=a, X=x], index 0 for +1 and 1 for -1.
    pub mu: [[f64; 2]; 2],
    /// `pa[zi]` = P(A=+1 | Z=z, X=x).
    pub pa: [f64; 2],
    /// P(Z=+1 | X=x).
    pub pz: f64,
    pub k0: f64,
    pub k1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousNuisanceModel {
    pub(crate) mu: [[Regressor; 2]; 2],
    pub(crate) pa: [Classifier; 2],
    pub(crate) pz: Classifier,
    pub k0: f64,
    pub k1: f64,
}

impl ContinuousNuisanceModel {
    pub fn mu(&self, z: f64, a: f64, x: ArrayView1<f64>) -> f64 {
        self.mu[arm_index(z)][arm_index(a)].predict(x).clamp(self.k0, self.k1)
    }

    pub fn pa(&self, z: f64, x: ArrayView1<f64>) -> f64 {
        let mut p = self.pa[arm_index(z)].predict_proba(x);
        floor_probs(&mut p);
        p[1]
    }

    pub fn pz(&self, x: ArrayView1<f64>) -> f64 {
        let mut p = self.pz.predict_proba(x);
        floor_probs(&mut p);
        p[1]
    }

    pub fn inputs_at(&self, x: ArrayView1<f64>) -> MpInputs {
        let mut mu = [[0.0; 2]; 2];
        for (zi, z) in [1.0, -1.0].into_iter().enumerate() {
            for (ai, a) in [1.0, -1.0].into_iter().enumerate() {
                mu[zi][ai] = self.mu(z, a, x);
            }
        }
        MpInputs { mu, pa: [self.pa(1.0, x), self.pa(-1.0, x)], pz: self.pz(x), k0: self.k0, k1: self.k1 }
    }
}

pub fn fit_continuous_nuisance(
    table: &ObservationTable,
    kind: &EstimatorKind,
    seed: u64,
) -> Result<ContinuousNuisanceModel> {
    let (k0, k1) = match table.outcome() {
        OutcomeKind::Bounded { k0, k1 } => (k0, k1),
        _ => return Err(Error::arg("continuous nuisance needs a bounded outcome")),
    };
    let label = |s: f64| if s > 0.0 { "+1" } else { "-1" };
    let sub_seed = |k: u64| rng::derive_seed(seed, rng::label::NUISANCE * 16 + k);
    let mut cells: Vec<Regressor> = Vec::with_capacity(4);
    for z in [1.0, -1.0] {
        for a in [1.0, -1.0] {
            let rows: Vec<usize> = (0..table.n()).filter(|&i| table.z()[i] == z && table.a()[i] == a).collect();
            if rows.is_empty() {
                return Err(Error::DegenerateFit(format!("cell (z={}, a={}) is empty", label(z), label(a))));
            }
            let sub = table.subset(&rows);
            let k = (arm_index(z) * 2 + arm_index(a)) as u64;
            cells.push(Regressor::fit(kind, sub.x().view(), sub.y(), sub_seed(2 + k))?);
        }
    }
    let mut pa = Vec::with_capacity(2);
    for z in [1.0, -1.0] {
        let sub = table.subset(&table.arm_rows(z));
        let classes: Vec<usize> = sub.a().iter().map(|&a| usize::from(a > 0.0)).collect();
        pa.push(Classifier::fit(kind, sub.x().view(), &classes, 2, sub_seed(8 + arm_index(z) as u64))?);
    }
    let zc: Vec<usize> = table.z().iter().map(|&z| usize::from(z > 0.0)).collect();
    let pz = Classifier::fit(kind, table.x().view(), &zc, 2, sub_seed(10))?;

    let mut it = cells.into_iter();
    let mut next = || it.next().expect("four cells");
    let mu = [[next(), next()], [next(), next()]];
    let pa_minus = pa.pop().expect("two arms");
    let pa_plus = pa.pop().expect("two arms");
    Ok(ContinuousNuisanceModel { mu, pa: [pa_plus, pa_minus], pz, k0, k1 })
}

/// Either kind of fitted nuisance model.
impl NuisanceModel {
    /// Whether every component model takes `d` covariates.
    pub fn accepts_dim(&self, d: usize) -> bool {
        match self {
            NuisanceModel::Joint(j) => j.arms.iter().all(|c| c.accepts_dim(d)),
            NuisanceModel::Continuous(c) => {
                c.mu.iter().flatten().all(|r| r.accepts_dim(d))
                    && c.pa.iter().all(|p| p.accepts_dim(d))
                    && c.pz.accepts_dim(d)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NuisanceModel {
    Joint(JointProbModel),
    Continuous(ContinuousNuisanceModel),
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn table_with(n: usize, seed: u64, freq: [[f64; 4]; 2]) -> ObservationTable {
        let mut r = rng::from_seed(seed);
        let x = Array2::from_shape_fn((n, 2), |_| r.random::<f64>());
        let mut z = Vec::new();
        let mut a = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let zi = usize::from(r.random::<f64>() < 0.5);
            let u: f64 = r.random();
            let mut cum = 0.0;
            let mut k = 3;
            for (c, p) in freq[zi].iter().enumerate() {
                cum += p;
                if u < cum {
                    k = c;
                    break;
                }
            }
            z.push(if zi == 0 { 1.0 } else { -1.0 });
            y.push(if k < 2 { 1.0 } else { -1.0 });
            a.push(if k % 2 == 0 { 1.0 } else { -1.0 });
        }
        ObservationTable::new(x, z, a, y, OutcomeKind::Binary).unwrap()
    }

    #[test]
    fn joint_probs_match_arm_frequencies() {
        let freq = [[0.4, 0.1, 0.2, 0.3], [0.1, 0.3, 0.25, 0.35]];
        let t = table_with(4000, 5, freq);
        let kind = EstimatorKind::MultinomialLogit(LogitConfig::default());
        let m = fit_joint_prob(&t, &kind, 1).unwrap();
        let x = ndarray::array![0.3, 0.6];
        for (zi, z) in [1.0, -1.0].into_iter().enumerate() {
            let p = m.arm_probs(z, x.view());
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for k in 0..4 {
                assert!((p[k] - freq[zi][k]).abs() < 0.05, "arm {zi}: {p:?}");
            }
        }
    }

    #[test]
    fn single_arm_table_is_degenerate() {
        let t = table_with(50, 1, [[0.25; 4], [0.25; 4]]);
        let rows = t.arm_rows(1.0);
        let err = fit_joint_prob(&t.subset(&rows), &EstimatorKind::default(), 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(ref m) if m.contains("z=-1")));
    }

    fn bounded_table(n: usize, seed: u64, drop_cell: Option<(f64, f64)>) -> ObservationTable {
        let mut r = rng::from_seed(seed);
        let mut xs = Vec::new();
        let (mut z, mut a, mut y) = (Vec::new(), Vec::new(), Vec::new());
        while z.len() < n {
            let zi = if r.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
            let ai = if r.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
            if drop_cell == Some((zi, ai)) {
                continue;
            }
            xs.push(r.random::<f64>());
            z.push(zi);
            a.push(ai);
            y.push(2.0);
        }
        let x = Array2::from_shape_vec((n, 1), xs).unwrap();
        ObservationTable::new(x, z, a, y, OutcomeKind::bounded(-3.0, 4.0).unwrap()).unwrap()
    }

    #[test]
    fn continuous_nuisance_constant_outcome_and_balanced_instrument() {
        let t = bounded_table(4000, 2, None);
        let kind = EstimatorKind::RandomForest(ForestConfig { n_trees: 50, node_size: 5, ..ForestConfig::default() });
        let m = fit_continuous_nuisance(&t, &kind, 3).unwrap();
        let x = ndarray::array![0.4];
        for z in [1.0, -1.0] {
            for a in [1.0, -1.0] {
                assert_eq!(m.mu(z, a, x.view()), 2.0);
            }
        }
        assert!((m.pz(x.view()) - 0.5).abs() < 0.05);
        let lin = fit_continuous_nuisance(&t, &EstimatorKind::MultinomialLogit(LogitConfig::default()), 3).unwrap();
        assert!((lin.mu(1.0, -1.0, x.view()) - 2.0).abs() < 1e-9);
        assert!((lin.pz(x.view()) - 0.5).abs() < 0.05);
    }

    #[test]
    fn continuous_nuisance_names_missing_cell() {
        let t = bounded_table(200, 2, Some((1.0, -1.0)));
        let err = fit_continuous_nuisance(&t, &EstimatorKind::default(), 3).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(ref m) if m.contains("z=+1, a=-1")), "{err}");
    }

    #[test]
    fn floor_renormalizes() {
        let mut p = [0.0, 0.5, 0.5, 0.0];
        floor_probs(&mut p);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[0] > 0.0);
    }
}
