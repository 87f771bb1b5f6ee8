//! Simulation designs and their oracle treatment effects.
//!
//! Inside every linear predictor the instrument and the treatment enter as 0/1 indicators
//! (`Z ~ Bern(0.5)`, `A = 1` treated); the emitted table recodes both to ±1. The oracle CATE is
//! the contrast between `A = 1` and `A = 0` on the outcome-mean scale (a probability for binary
//! outcomes).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::normal::{truncnorm_mean, truncnorm_sample};
use super::quadrature::gauss_legendre;
use crate::data::{ObservationTable, OutcomeKind};
use crate::error::{Error, Result};
use crate::rng;

/// Truncation limits of the bounded continuous design.
pub const TRUNC_LIMITS: (f64, f64) = (-3.0, 4.0);
/// Default number of Gauss–Legendre nodes for integrating out `U`.
pub const DEFAULT_QUAD_NODES: usize = 64;

pub fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Two covariates, no instrument, continuous Gaussian-noise outcome.
    OwlFailureContinuous,
    /// Two covariates, no instrument, binary outcome.
    OwlFailureBinary,
    /// Ten covariates, binary instrument, binary outcome.
    MainBinary,
    /// Ten covariates, binary instrument, truncated normal outcome on [-3, 4].
    ContinuousTruncNormal,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::OwlFailureContinuous => "owl-failure-continuous",
            Family::OwlFailureBinary => "owl-failure-binary",
            Family::MainBinary => "main-binary",
            Family::ContinuousTruncNormal => "continuous-truncnorm",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::OwlFailureContinuous | Family::OwlFailureBinary => 2,
            Family::MainBinary | Family::ContinuousTruncNormal => 10,
        }
    }

    pub fn outcome(&self) -> OutcomeKind {
        match self {
            Family::OwlFailureContinuous => OutcomeKind::Unbounded,
            Family::OwlFailureBinary | Family::MainBinary => OutcomeKind::Binary,
            Family::ContinuousTruncNormal => OutcomeKind::Bounded { k0: TRUNC_LIMITS.0, k1: TRUNC_LIMITS.1 },
        }
    }

    /// Whether the design has an instrument that moves the treatment.
    pub fn has_instrument(&self) -> bool {
        matches!(self, Family::MainBinary | Family::ContinuousTruncNormal)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "owl-failure-continuous" => Family::OwlFailureContinuous,
            "owl-failure-binary" => Family::OwlFailureBinary,
            "main-binary" => Family::MainBinary,
            "continuous-truncnorm" => Family::ContinuousTruncNormal,
            other => return Err(Error::arg(format!("unknown family `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    Model1,
    Model2,
}

impl ModelVariant {
    pub fn index(&self) -> u8 {
        match self {
            ModelVariant::Model1 => 1,
            ModelVariant::Model2 => 2,
        }
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "model1" => Ok(ModelVariant::Model1),
            "2" | "model2" => Ok(ModelVariant::Model2),
            other => Err(Error::arg(format!("unknown model variant `{other}` (expected 1 or 2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimScenario {
    pub family: Family,
    pub lambda: f64,
    pub xi: f64,
    pub delta: f64,
    /// Instrument strength in the treatment model.
    pub alpha: f64,
    /// Direct effect of the instrument on the outcome.
    pub c: f64,
    pub g1: ModelVariant,
    pub g2: ModelVariant,
    pub n_train: usize,
    pub n_test: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            family: Family::MainBinary,
            lambda: 0.5,
            xi: 0.0,
            delta: 0.5,
            alpha: 8.0,
            c: 0.0,
            g1: ModelVariant::Model1,
            g2: ModelVariant::Model1,
            n_train: 300,
            n_test: 20_000,
            reps: 50,
            seed: 0,
        }
    }
}

/// Hidden variables of a generated table, kept apart from the observed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    scenario: SimScenario,
    u: Vec<f64>,
    z01: Vec<f64>,
}

impl Oracle {
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Instrument as the 0/1 indicator used inside the models.
    pub fn z01(&self) -> &[f64] {
        &self.z01
    }

    /// Per-row `CATE(x_i, u_i, z_i)`: what the omniscient rule sees.
    pub fn cate_rows(&self, xs: ArrayView2<f64>) -> Vec<f64> {
        xs.axis_iter(Axis(0)).enumerate().map(|(i, x)| self.scenario.cate(x, self.u[i], self.z01[i])).collect()
    }

    /// Per-row `CATE(x_i)` with `U` (and `Z` when it has a direct effect) integrated out.
    pub fn cate_x_rows(&self, xs: ArrayView2<f64>, n_quad: usize) -> Vec<f64> {
        let q = Quadrature::new(n_quad);
        xs.axis_iter(Axis(0)).map(|x| self.scenario.cate_x_with(x, &q)).collect()
    }

    /// Per-row `P(A = 1 | X, U, Z)`.
    pub fn treatment_probs(&self, xs: ArrayView2<f64>) -> Vec<f64> {
        xs.axis_iter(Axis(0))
            .enumerate()
            .map(|(i, x)| self.scenario.treatment_prob(x, self.u[i], self.z01[i]))
            .collect()
    }
}

/// Gauss–Legendre nodes mapped to `U ~ Unif[-1, 1]` (weights sum to one).
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(n: usize) -> Self {
        let (nodes, w) = gauss_legendre(n.max(1));
        Quadrature { nodes, weights: w.into_iter().map(|v| 0.5 * v).collect() }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::arg("reps must be at least 1"));
        }
        for (name, v) in
            [("lambda", self.lambda), ("xi", self.xi), ("delta", self.delta), ("alpha", self.alpha), ("c", self.c)]
        {
            if !v.is_finite() {
                return Err(Error::arg(format!("{name} must be finite")));
            }
        }
        let owl = !self.family.has_instrument();
        if owl && (self.g1 != ModelVariant::Model1 || self.g2 != ModelVariant::Model1) {
            return Err(Error::arg(format!("family `{}` has fixed outcome models; use g1 = g2 = 1", self.family)));
        }
        if self.family == Family::ContinuousTruncNormal && self.g1 != ModelVariant::Model1 {
            return Err(Error::arg("family `continuous-truncnorm` is defined with g1 = Model 1 only"));
        }
        if self.c != 0.0 && self.family != Family::MainBinary {
            return Err(Error::arg("a direct instrument effect c is only defined for family `main-binary`"));
        }
        Ok(())
    }

    fn g1(&self, x: ArrayView1<f64>, u: f64) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        match (self.family, self.g1) {
            (Family::OwlFailureContinuous, _) => 1.0 + x1 + x2 + self.xi * u,
            (_, ModelVariant::Model1) => 1.0 - x1 + x2 + self.xi * u,
            (_, ModelVariant::Model2) => 1.0 - x1 * x1 + x2 * x2 + self.xi * x1 * x2 * u,
        }
    }

    /// Treatment term per unit of `A` (the `A = 1` minus `A = 0` shift of the linear predictor).
    fn g2(&self, x: ArrayView1<f64>, u: f64) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        match (self.family, self.g2) {
            (Family::OwlFailureContinuous, _) => 0.442 * (1.0 - x1 - x2 + self.delta * u),
            (_, ModelVariant::Model1) => 0.442 * (1.0 - x1 + x2 + self.delta * u),
            (_, ModelVariant::Model2) => x2 - 0.25 * x1 * x1 - 1.0 + self.delta * u,
        }
    }

    /// `P(A = 1 | X = x, U = u, Z = z01)`.
    pub fn treatment_prob(&self, x: ArrayView1<f64>, u: f64, z01: f64) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        if self.family.has_instrument() {
            expit(self.alpha * z01 + x1 - 7.0 * x2 + self.lambda * (1.0 + x1) * u)
        } else {
            expit(1.0 + x1 - x2 + self.lambda * u)
        }
    }

    /// `E[Y | X = x, U = u, A = a01, Z = z01]` on the outcome's own scale (probability of `Y = +1`
    /// for binary outcomes).
    pub fn outcome_mean(&self, x: ArrayView1<f64>, u: f64, a01: f64, z01: f64) -> f64 {
        let g1 = self.g1(x, u);
        let g2 = self.g2(x, u) * a01;
        match self.family {
            Family::OwlFailureContinuous => g1 + g2,
            Family::OwlFailureBinary => expit(g1 + g2),
            Family::MainBinary => expit(g1 + g2 + self.c * z01),
            Family::ContinuousTruncNormal => truncnorm_mean(g1 + 3.0 * g2, 1.0, TRUNC_LIMITS.0, TRUNC_LIMITS.1),
        }
    }

    /// `CATE(x, u, z)`: outcome mean under `A = 1` minus under `A = 0`.
    pub fn cate(&self, x: ArrayView1<f64>, u: f64, z01: f64) -> f64 {
        self.outcome_mean(x, u, 1.0, z01) - self.outcome_mean(x, u, 0.0, z01)
    }

    fn cate_x_with(&self, x: ArrayView1<f64>, q: &Quadrature) -> f64 {
        let over_u = |z01: f64| q.nodes.iter().zip(&q.weights).map(|(&u, &w)| w * self.cate(x, u, z01)).sum::<f64>();
        if self.c == 0.0 {
            over_u(0.0)
        } else {
            0.5 * (over_u(0.0) + over_u(1.0))
        }
    }

    /// `CATE(x) = E[CATE(X, U, Z) | X = x]` with `U ~ Unif[-1, 1]` integrated by an `n_quad`-node
    /// Gauss–Legendre rule and `Z ~ Bern(0.5)` averaged exactly.
    pub fn true_cate_x(&self, x: ArrayView1<f64>, n_quad: usize) -> f64 {
        self.cate_x_with(x, &Quadrature::new(n_quad))
    }

    /// Draws `n` rows. The table holds `(X, Z, A, Y)`; `U` and the 0/1 instrument stay in the
    /// oracle.
    pub fn generate(&self, n: usize, seed: u64) -> Result<(ObservationTable, Oracle)> {
        self.validate()?;
        if n == 0 {
            return Err(Error::arg("cannot generate an empty table"));
        }
        let d = self.family.dim();
        let mut r = rng::from_seed(seed);
        let mut x = Array2::zeros((n, d));
        let (mut z, mut a, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let (mut us, mut z01s) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let z01 = if r.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
            for j in 0..d {
                x[[i, j]] = 2.0 * r.random::<f64>() - 1.0;
            }
            let u = 2.0 * r.random::<f64>() - 1.0;
            let xi = x.row(i);
            let a01 = if r.random::<f64>() < self.treatment_prob(xi, u, z01) { 1.0 } else { 0.0 };
            let mean = self.outcome_mean(xi, u, a01, z01);
            let yi = match self.family {
                Family::OwlFailureContinuous => mean + r.sample::<f64, _>(StandardNormal),
                Family::OwlFailureBinary | Family::MainBinary => {
                    if r.random::<f64>() < mean {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Family::ContinuousTruncNormal => {
                    let mu = self.g1(xi, u) + 3.0 * self.g2(xi, u) * a01;
                    truncnorm_sample(mu, 1.0, TRUNC_LIMITS.0, TRUNC_LIMITS.1, &mut r)?
                }
            };
            z.push(2.0 * z01 - 1.0);
            a.push(2.0 * a01 - 1.0);
            y.push(yi);
            us.push(u);
            z01s.push(z01);
        }
        let table = ObservationTable::new(x, z, a, y, self.family.outcome())?;
        Ok((table, Oracle { scenario: *self, u: us, z01: z01s }))
    }
}

/// Empirical compliance `P(A = 1 | Z = 1) − P(A = 1 | Z = −1)`.
pub fn compliance(table: &ObservationTable) -> Result<f64> {
    let rate = |zv: f64| -> Result<f64> {
        let rows = table.arm_rows(zv);
        if rows.is_empty() {
            return Err(Error::arg(format!("no rows with z = {zv}")));
        }
        Ok(rows.iter().filter(|&&i| table.a()[i] > 0.0).count() as f64 / rows.len() as f64)
    };
    Ok(rate(1.0)? - rate(-1.0)?)
}
