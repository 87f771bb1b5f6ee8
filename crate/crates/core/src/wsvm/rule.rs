use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use super::kernel::KernelSpec;
use crate::bounds::{self, BoundMethod};
use crate::nuisance::NuisanceModel;
use crate::rng;
use crate::transform::sgn;

/// `f(x) = Σ_i alphas_i k(support_i, x) + beta0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelExpansion {
    pub support: Array2<f64>,
    pub alphas: Vec<f64>,
    pub beta0: f64,
    pub kernel: KernelSpec,
}

impl KernelExpansion {
    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        self.beta0
            + self.support.axis_iter(Axis(0)).zip(&self.alphas).map(|(s, a)| a * self.kernel.eval(s, x)).sum::<f64>()
    }
}

/// Pointwise plug-in rule `sgn{Û(x)⁺ − (−L̂(x))⁺}` from a fitted nuisance model.
#[derive(Debug, Clone, PartialEq)]
pub struct PlugInRule {
    pub model: Arc<NuisanceModel>,
    pub method: BoundMethod,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreatmentRule {
    KernelExpansion(KernelExpansion),
    PlugIn(PlugInRule),
    /// Always recommends the given sign.
    Constant(f64),
    /// Fair coin per `(seed, row)`.
    CoinFlip {
        seed: u64,
    },
}

/// The plug-in decision value `Û⁺ − (−L̂)⁺`.
pub fn plug_in_value(l: f64, u: f64) -> f64 {
    u.max(0.0) - (-l).max(0.0)
}

fn coin(seed: u64, row: usize) -> f64 {
    if rng::derive_seed(rng::derive_seed(seed, rng::label::COIN), row as u64) >> 63 == 1 {
        1.0
    } else {
        -1.0
    }
}

impl TreatmentRule {
    /// Real-valued decision for row `row` with covariates `x`. Its generic sign is the recommendation.
    pub fn decision(&self, x: ArrayView1<f64>, row: usize) -> f64 {
        match self {
            TreatmentRule::KernelExpansion(k) => k.value(x),
            TreatmentRule::PlugIn(p) => {
                let xs = x.insert_axis(Axis(0));
                let iv = bounds::estimate_intervals(&p.model, xs, p.method, p.delta)
                    .expect("plug-in rule built from a matching model")[0];
                plug_in_value(iv.l, iv.u)
            }
            TreatmentRule::Constant(s) => *s,
            TreatmentRule::CoinFlip { seed } => coin(*seed, row),
        }
    }

    pub fn decisions(&self, xs: ArrayView2<f64>) -> Vec<f64> {
        if let TreatmentRule::PlugIn(p) = self {
            return bounds::estimate_intervals(&p.model, xs, p.method, p.delta)
                .expect("plug-in rule built from a matching model")
                .iter()
                .map(|iv| plug_in_value(iv.l, iv.u))
                .collect();
        }
        let rows: Vec<(usize, ArrayView1<f64>)> = xs.axis_iter(Axis(0)).enumerate().collect();
        rows.into_par_iter().map(|(i, x)| self.decision(x, i)).collect()
    }

    /// Recommended treatments in {-1, +1}.
    pub fn signs(&self, xs: ArrayView2<f64>) -> Vec<f64> {
        self.decisions(xs).into_iter().map(sgn).collect()
    }

    /// Errors unless the rule can be applied to rows with `d` covariates.
    pub fn check_dim(&self, d: usize) -> crate::error::Result<()> {
        let ok = match self {
            TreatmentRule::KernelExpansion(k) => k.support.ncols() == d,
            TreatmentRule::PlugIn(p) => p.model.accepts_dim(d),
            TreatmentRule::Constant(_) | TreatmentRule::CoinFlip { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(crate::error::Error::Schema(format!("rule does not accept {d} covariates")))
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TreatmentRule::KernelExpansion(_) => "kernel-expansion",
            TreatmentRule::PlugIn(_) => "plug-in",
            TreatmentRule::Constant(_) => "constant",
            TreatmentRule::CoinFlip { .. } => "coin-flip",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_flip_is_fair_and_reproducible() {
        let r = TreatmentRule::CoinFlip { seed: 3 };
        let xs = Array2::zeros((100_000, 1));
        let a = r.signs(xs.view());
        assert_eq!(a, r.signs(xs.view()));
        let frac = a.iter().filter(|&&s| s > 0.0).count() as f64 / a.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
        let b = TreatmentRule::CoinFlip { seed: 4 }.signs(xs.view());
        assert_ne!(a, b);
    }

    #[test]
    fn plug_in_values() {
        assert_eq!(sgn(plug_in_value(1.0, 3.0)), 1.0);
        assert_eq!(sgn(plug_in_value(-1.0, 3.0)), 1.0);
        assert_eq!(sgn(plug_in_value(-3.0, 1.0)), -1.0);
    }
}
