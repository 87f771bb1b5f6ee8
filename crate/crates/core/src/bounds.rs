//! Partial identification intervals for the conditional average treatment effect.

use ndarray::{ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nuisance::{ContinuousNuisanceModel, JointProbModel, MpInputs, NuisanceModel};

const SUM_TOL: f64 = 1e-9;

/// The eight probabilities `p_{y,a|z} = P(Y=y, A=a | Z=z)` at one covariate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EightProbs {
    /// `p[yi][ai][zi]` with index 0 for +1 and 1 for -1.
    p: [[[f64; 2]; 2]; 2],
}

fn ix(s: i8) -> usize {
    usize::from(s < 0)
}

impl EightProbs {
    /// Build from per-arm vectors ordered `(y,a) = (+,+), (+,-), (-,+), (-,-)`.
    pub fn from_arms(plus: [f64; 4], minus: [f64; 4]) -> Result<Self> {
        let e = Self::from_arms_unchecked(plus, minus);
        e.validate()?;
        Ok(e)
    }

    pub(crate) fn from_arms_unchecked(plus: [f64; 4], minus: [f64; 4]) -> Self {
        let mut p = [[[0.0; 2]; 2]; 2];
        for (zi, arm) in [plus, minus].iter().enumerate() {
            for (k, v) in arm.iter().enumerate() {
                p[k / 2][k % 2][zi] = *v;
            }
        }
        EightProbs { p }
    }

    pub fn validate(&self) -> Result<()> {
        for zi in 0..2 {
            let mut s = 0.0;
            for yi in 0..2 {
                for ai in 0..2 {
                    let v = self.p[yi][ai][zi];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::arg(format!("probability {v} outside [0,1]")));
                    }
                    s += v;
                }
            }
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::arg(format!("arm probabilities sum to {s}, not 1")));
            }
        }
        Ok(())
    }

    /// `p_{y,a|z}` for signs `y, a, z` in {-1, +1}.
    pub fn get(&self, y: i8, a: i8, z: i8) -> f64 {
        self.p[ix(y)][ix(a)][ix(z)]
    }

    /// `P(A=a | Z=z)`.
    pub fn pa(&self, a: i8, z: i8) -> f64 {
        self.get(1, a, z) + self.get(-1, a, z)
    }
}

/// Bounds `[l, u]` for the CATE at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub l: f64,
    pub u: f64,
    /// Set when estimated endpoints crossed and were collapsed to their midpoint.
    pub reconciled: bool,
}

impl Interval {
    pub fn new(l: f64, u: f64) -> Result<Self> {
        if !(l.is_finite() && u.is_finite()) || l > u {
            return Err(Error::arg(format!("invalid interval [{l}, {u}]")));
        }
        Ok(Interval { l, u, reconciled: false })
    }

    /// Accept possibly crossed estimates, collapsing `l > u` to the midpoint.
    pub fn reconciled(l: f64, u: f64) -> Self {
        if l > u {
            let m = 0.5 * (l + u);
            Interval { l: m, u: m, reconciled: true }
        } else {
            Interval { l, u, reconciled: false }
        }
    }

    /// Both endpoints moved down by `delta`.
    pub fn shift(self, delta: f64) -> Self {
        Interval { l: self.l - delta, u: self.u - delta, reconciled: self.reconciled }
    }

    pub fn width(&self) -> f64 {
        self.u - self.l
    }

    pub fn covers_zero(&self) -> bool {
        self.l <= 0.0 && self.u >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundMethod {
    BalkePearl,
    Siddique,
    ManskiPepper { k0: f64, k1: f64 },
}

impl BoundMethod {
    pub fn manski_pepper(k0: f64, k1: f64) -> Result<Self> {
        if !(k0.is_finite() && k1.is_finite() && k0 < k1) {
            return Err(Error::arg(format!("Manski-Pepper needs k0 < k1, got [{k0}, {k1}]")));
        }
        Ok(BoundMethod::ManskiPepper { k0, k1 })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundMethod::BalkePearl => "bp",
            BoundMethod::Siddique => "sid",
            BoundMethod::ManskiPepper { .. } => "mp",
        }
    }
}

/// The eight Balke-Pearl lower-bound candidates in display order.
pub fn balke_pearl_lower_candidates(p: &EightProbs) -> [f64; 8] {
    let q = |y, a, z| p.get(y, a, z);
    [
        q(-1, -1, -1) + q(1, 1, 1) - 1.0,
        q(-1, -1, 1) + q(1, 1, 1) - 1.0,
        q(1, 1, -1) + q(-1, -1, 1) - 1.0,
        q(-1, -1, -1) + q(1, 1, -1) - 1.0,
        2.0 * q(-1, -1, -1) + q(1, 1, -1) + q(1, -1, 1) + q(1, 1, 1) - 2.0,
        q(-1, -1, -1) + 2.0 * q(1, 1, -1) + q(-1, -1, 1) + q(-1, 1, 1) - 2.0,
        q(1, -1, -1) + q(1, 1, -1) + 2.0 * q(-1, -1, 1) + q(1, 1, 1) - 2.0,
        q(-1, -1, -1) + q(-1, 1, -1) + q(-1, -1, 1) + 2.0 * q(1, 1, 1) - 2.0,
    ]
}

/// The eight Balke-Pearl upper-bound candidates in display order.
pub fn balke_pearl_upper_candidates(p: &EightProbs) -> [f64; 8] {
    let q = |y, a, z| p.get(y, a, z);
    [
        1.0 - q(1, -1, -1) - q(-1, 1, 1),
        1.0 - q(-1, 1, -1) - q(1, -1, 1),
        1.0 - q(-1, 1, -1) - q(1, -1, -1),
        1.0 - q(-1, 1, 1) - q(1, -1, 1),
        2.0 - 2.0 * q(-1, 1, -1) - q(1, -1, -1) - q(1, -1, 1) - q(1, 1, 1),
        2.0 - q(-1, 1, -1) - 2.0 * q(1, -1, -1) - q(-1, -1, 1) - q(-1, 1, 1),
        2.0 - q(1, -1, -1) - q(1, 1, -1) - 2.0 * q(-1, 1, 1) - q(1, -1, 1),
        2.0 - q(-1, -1, -1) - q(-1, 1, -1) - q(-1, 1, 1) - 2.0 * q(1, -1, 1),
    ]
}

fn max8(v: [f64; 8]) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min8(v: [f64; 8]) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

fn balke_pearl_raw(p: &EightProbs) -> (f64, f64) {
    (max8(balke_pearl_lower_candidates(p)), min8(balke_pearl_upper_candidates(p)))
}

fn siddique_raw(p: &EightProbs) -> (f64, f64) {
    let q = |y, a, z| p.get(y, a, z);
    let l = f64::max(q(1, 1, 1) + q(1, -1, 1), q(1, 1, -1))
        - f64::min(q(1, -1, -1) + p.pa(1, -1), q(1, -1, 1) + p.pa(1, 1));
    let u = f64::min(q(1, 1, 1) + p.pa(-1, 1), q(1, 1, -1) + p.pa(-1, -1))
        - f64::max(q(1, -1, -1) + q(1, 1, -1), q(1, -1, 1));
    (l, u)
}

/// Balke-Pearl interval under the core instrument assumptions.
pub fn balke_pearl(p: &EightProbs) -> Result<Interval> {
    p.validate()?;
    let (l, u) = balke_pearl_raw(p);
    Ok(Interval::reconciled(l, u))
}

/// Siddique interval under the additional correct non-compliant decision assumption.
pub fn siddique(p: &EightProbs) -> Result<Interval> {
    p.validate()?;
    let (l, u) = siddique_raw(p);
    Ok(Interval::reconciled(l, u))
}

/// Raw Manski-Pepper endpoints from nuisance values at one point (may cross).
pub fn manski_pepper_raw(m: &MpInputs) -> (f64, f64) {
    // Index 0 is +1 and index 1 is -1 for both z and a.
    let pz = [m.pz, 1.0 - m.pz];
    let pa_of = |zi: usize, ai: usize| if ai == 0 { m.pa[zi] } else { 1.0 - m.pa[zi] };
    let psi = |zi: usize, ai: usize, k: f64| m.mu[zi][ai] * pa_of(zi, ai) + k * pa_of(zi, 1 - ai);
    let (k0, k1) = (m.k0, m.k1);
    let (p, q) = (0, 1);
    let l = pz[q] * psi(q, p, k0) + pz[p] * psi(q, p, k0).max(psi(p, p, k0))
        - pz[q] * psi(q, q, k1).min(psi(p, q, k1))
        - pz[p] * psi(p, q, k1);
    let u = pz[q] * psi(q, p, k1).min(psi(p, p, k1)) + pz[p] * psi(p, p, k1)
        - pz[q] * psi(q, q, k0)
        - pz[p] * psi(q, q, k0).max(psi(p, q, k0));
    (l, u)
}

pub fn manski_pepper(model: &ContinuousNuisanceModel, x: ArrayView1<f64>) -> Interval {
    let (l, u) = manski_pepper_raw(&model.inputs_at(x));
    Interval::reconciled(l, u)
}

fn joint_raw(model: &JointProbModel, x: ArrayView1<f64>, method: BoundMethod) -> (f64, f64) {
    let p = model.eight_probs(x);
    match method {
        BoundMethod::BalkePearl => balke_pearl_raw(&p),
        _ => siddique_raw(&p),
    }
}

/// Per-row intervals: bound formula, shift by `delta`, then reconcile crossings.
pub fn estimate_intervals(
    model: &NuisanceModel,
    xs: ArrayView2<f64>,
    method: BoundMethod,
    delta: f64,
) -> Result<Vec<Interval>> {
    if !delta.is_finite() {
        return Err(Error::arg("margin must be finite"));
    }
    let raw = |x: ArrayView1<f64>| -> (f64, f64) {
        match (model, method) {
            (NuisanceModel::Joint(m), BoundMethod::BalkePearl | BoundMethod::Siddique) => joint_raw(m, x, method),
            (NuisanceModel::Continuous(m), BoundMethod::ManskiPepper { k0, k1 }) => {
                let mut inputs = m.inputs_at(x);
                inputs.k0 = k0;
                inputs.k1 = k1;
                manski_pepper_raw(&inputs)
            }
            _ => unreachable!("checked below"),
        }
    };
    match (model, method) {
        (NuisanceModel::Joint(_), BoundMethod::BalkePearl | BoundMethod::Siddique) => {}
        (NuisanceModel::Continuous(_), BoundMethod::ManskiPepper { .. }) => {}
        _ => return Err(Error::arg(format!("bound `{}` does not match the fitted nuisance model", method.name()))),
    }
    let rows: Vec<ArrayView1<f64>> = xs.axis_iter(Axis(0)).collect();
    Ok(rows
        .into_par_iter()
        .map(|x| {
            let (l, u) = raw(x);
            Interval::reconciled(l - delta, u - delta)
        })
        .collect())
}
