//! End-to-end rule estimators: IV-PILE, its sample-splitting variant, the plug-in rule,
//! outcome weighted learning and the coin-flip baseline.

use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::bounds::{estimate_intervals, BoundMethod, Interval};
use crate::data::{ObservationTable, OutcomeKind};
use crate::error::{Error, Result};
use crate::nuisance::{self, Classifier, EstimatorKind, NuisanceModel};
use crate::rng;
use crate::transform::{sgn, weight_label, LatentClass, WeightedLabel};
use crate::wsvm::{self, KernelSpec, PlugInRule, SolverOptions, TreatmentRule};

/// Propensity scores are clipped to this range before inverse weighting.
pub const PROPENSITY_CLIP: (f64, f64) = (0.01, 0.99);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub estimator: EstimatorKind,
    pub bound: BoundMethod,
    pub delta: f64,
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            estimator: EstimatorKind::default(),
            bound: BoundMethod::BalkePearl,
            delta: 0.0,
            kernel: KernelSpec::Gaussian { sigma: 1.0 },
            lambda: 0.01,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

impl PipelineConfig {
    fn check_outcome(&self, table: &ObservationTable) -> Result<()> {
        match (self.bound, table.outcome()) {
            (BoundMethod::BalkePearl | BoundMethod::Siddique, OutcomeKind::Binary) => Ok(()),
            (BoundMethod::ManskiPepper { .. }, OutcomeKind::Bounded { .. }) => Ok(()),
            (b, o) => Err(Error::arg(format!("bound `{}` cannot be used with outcome {o:?}", b.name()))),
        }
    }
}

/// Diagnostics of one fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitReport {
    /// Rows whose interval excludes zero.
    pub n_labeled: usize,
    /// Rows whose interval covers zero.
    pub n_unlabeled: usize,
    pub n_reconciled: usize,
    pub n_zero_weight: usize,
    pub dual_gap: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Rows (of the input table) used to fit nuisance models.
    pub nuisance_rows: Vec<usize>,
    /// Rows used to train the classifier.
    pub svm_rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FittedRule {
    pub rule: TreatmentRule,
    pub report: FitReport,
}

/// Nuisance model matching the configured bound.
pub fn fit_nuisance(table: &ObservationTable, cfg: &PipelineConfig) -> Result<NuisanceModel> {
    cfg.check_outcome(table)?;
    let seed = rng::derive_seed(cfg.seed, rng::label::NUISANCE);
    Ok(match cfg.bound {
        BoundMethod::ManskiPepper { .. } => {
            NuisanceModel::Continuous(nuisance::fit_continuous_nuisance(table, &cfg.estimator, seed)?)
        }
        _ => NuisanceModel::Joint(nuisance::fit_joint_prob(table, &cfg.estimator, seed)?),
    })
}

fn svm_on_intervals(
    table: &ObservationTable,
    rows: &[usize],
    intervals: &[Interval],
    cfg: &PipelineConfig,
    nuisance_rows: Vec<usize>,
) -> Result<FittedRule> {
    let labels: Vec<WeightedLabel> = intervals.iter().map(weight_label).collect();
    let xs = table.x().select(ndarray::Axis(0), rows);
    let fit = wsvm::train_wsvm(xs.view(), &labels, cfg.kernel, cfg.lambda, &cfg.solver)?;
    let n_unlabeled = labels.iter().filter(|l| l.latent == LatentClass::Unlabeled).count();
    Ok(FittedRule {
        rule: fit.rule,
        report: FitReport {
            n_labeled: labels.len() - n_unlabeled,
            n_unlabeled,
            n_reconciled: intervals.iter().filter(|iv| iv.reconciled).count(),
            n_zero_weight: labels.iter().filter(|l| l.w == 0.0).count(),
            dual_gap: fit.solution.gap,
            converged: fit.solution.converged,
            iterations: fit.solution.iterations,
            nuisance_rows,
            svm_rows: rows.to_vec(),
        },
    })
}

/// IV-PILE: nuisance and bounds on all rows, then the weighted SVM on the same rows.
pub fn ivpile(train: &ObservationTable, cfg: &PipelineConfig) -> Result<FittedRule> {
    let model = fit_nuisance(train, cfg)?;
    let intervals = estimate_intervals(&model, train.x().view(), cfg.bound, cfg.delta)?;
    let all: Vec<usize> = (0..train.n()).collect();
    svm_on_intervals(train, &all, &intervals, cfg, all.clone())
}

/// Random halves `(I1, I2)` with `|I1| = ⌊n/2⌋`.
pub fn split_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, rng::label::SAMPLE_SPLIT));
    let (a, b) = idx.split_at(n / 2);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Sample-splitting IV-PILE: nuisance on one half, the classifier on the other.
pub fn ivpile_split(table: &ObservationTable, cfg: &PipelineConfig) -> Result<FittedRule> {
    if table.n() < 4 {
        return Err(Error::arg("sample splitting needs at least four rows"));
    }
    let (i1, i2) = split_halves(table.n(), cfg.seed);
    let model = fit_nuisance(&table.subset(&i1), cfg)?;
    let x2 = table.x().select(ndarray::Axis(0), &i2);
    let intervals = estimate_intervals(&model, x2.view(), cfg.bound, cfg.delta)?;
    svm_on_intervals(table, &i2, &intervals, cfg, i1)
}

/// Plug-in rule over a fitted nuisance model.
pub fn plug_in_rule(model: Arc<NuisanceModel>, method: BoundMethod, delta: f64) -> Result<TreatmentRule> {
    match (&*model, method) {
        (NuisanceModel::Joint(_), BoundMethod::BalkePearl | BoundMethod::Siddique) => {}
        (NuisanceModel::Continuous(_), BoundMethod::ManskiPepper { .. }) => {}
        _ => return Err(Error::arg(format!("bound `{}` does not match the nuisance model", method.name()))),
    }
    Ok(TreatmentRule::PlugIn(PlugInRule { model, method, delta }))
}

pub fn fit_plug_in(train: &ObservationTable, cfg: &PipelineConfig) -> Result<FittedRule> {
    let model = Arc::new(fit_nuisance(train, cfg)?);
    let intervals = estimate_intervals(&model, train.x().view(), cfg.bound, cfg.delta)?;
    let n_unlabeled = intervals.iter().filter(|iv| iv.covers_zero()).count();
    let all: Vec<usize> = (0..train.n()).collect();
    Ok(FittedRule {
        rule: plug_in_rule(model, cfg.bound, cfg.delta)?,
        report: FitReport {
            n_labeled: train.n() - n_unlabeled,
            n_unlabeled,
            n_reconciled: intervals.iter().filter(|iv| iv.reconciled).count(),
            converged: true,
            nuisance_rows: all,
            ..FitReport::default()
        },
    })
}

/// Propensity model `P(A = +1 | X)` used by outcome weighted learning.
pub fn fit_propensity(train: &ObservationTable, estimator: &EstimatorKind, seed: u64) -> Result<Classifier> {
    let classes: Vec<usize> = train.a().iter().map(|&a| usize::from(a > 0.0)).collect();
    Classifier::fit(estimator, train.x().view(), &classes, 2, rng::derive_seed(seed, rng::label::PROPENSITY))
}

/// Inverse-propensity pseudo-contrasts `A_i Y_i / π̂(A_i | X_i)` under a fitted propensity model.
pub fn ipw_contrasts(propensity: &Classifier, table: &ObservationTable) -> Vec<f64> {
    let (lo, hi) = PROPENSITY_CLIP;
    (0..table.n())
        .map(|i| {
            let p1 = propensity.predict_proba(table.x().row(i))[1].clamp(lo, hi);
            let a = table.a()[i];
            let pa = if a > 0.0 { p1 } else { 1.0 - p1 };
            a * table.y()[i] / pa
        })
        .collect()
}

/// Inverse-propensity pseudo-contrasts with the propensity fit on the same rows.
pub fn owl_contrasts(train: &ObservationTable, estimator: &EstimatorKind, seed: u64) -> Result<Vec<f64>> {
    Ok(ipw_contrasts(&fit_propensity(train, estimator, seed)?, train))
}

/// OWL training triples: weight `|Ĉ|`, label pushing `sgn f` toward `sgn Ĉ`.
pub fn owl_labels(contrasts: &[f64]) -> Vec<WeightedLabel> {
    contrasts
        .iter()
        .map(|&v| WeightedLabel {
            w: v.abs(),
            e: -sgn(v),
            latent: if v > 0.0 { LatentClass::Plus } else { LatentClass::Minus },
        })
        .collect()
}

/// Outcome weighted learning with an estimated propensity score.
pub fn owl(train: &ObservationTable, cfg: &PipelineConfig) -> Result<FittedRule> {
    let labels = owl_labels(&owl_contrasts(train, &cfg.estimator, cfg.seed)?);
    let fit = wsvm::train_wsvm(train.x().view(), &labels, cfg.kernel, cfg.lambda, &cfg.solver)?;
    let all: Vec<usize> = (0..train.n()).collect();
    Ok(FittedRule {
        rule: fit.rule,
        report: FitReport {
            n_labeled: train.n(),
            n_zero_weight: labels.iter().filter(|l| l.w == 0.0).count(),
            dual_gap: fit.solution.gap,
            converged: fit.solution.converged,
            iterations: fit.solution.iterations,
            nuisance_rows: all.clone(),
            svm_rows: all,
            ..FitReport::default()
        },
    })
}

pub fn coin_flip_rule(seed: u64) -> TreatmentRule {
    TreatmentRule::CoinFlip { seed }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    IvPile,
    IvPileSplit,
    PlugIn,
    Owl,
    CoinFlip,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::IvPile => "ivpile",
            Method::IvPileSplit => "ivpile-split",
            Method::PlugIn => "plugin",
            Method::Owl => "owl",
            Method::CoinFlip => "coin",
        }
    }

    pub fn fit(&self, table: &ObservationTable, cfg: &PipelineConfig) -> Result<FittedRule> {
        match self {
            Method::IvPile => ivpile(table, cfg),
            Method::IvPileSplit => ivpile_split(table, cfg),
            Method::PlugIn => fit_plug_in(table, cfg),
            Method::Owl => owl(table, cfg),
            Method::CoinFlip => Ok(FittedRule { rule: coin_flip_rule(cfg.seed), report: FitReport::default() }),
        }
    }
}

impl Method {
    /// Chooses `λ` and `σ` by cross-validation on `table`, then fits with them. Methods without
    /// tuning parameters are fit as is and return no CV result.
    pub fn fit_tuned(
        &self,
        table: &ObservationTable,
        cfg: &PipelineConfig,
        grid: &wsvm::TuningGrid,
    ) -> Result<(FittedRule, Option<wsvm::CvResult>)> {
        let cv_seed = rng::derive_seed(cfg.seed, rng::label::FOLDS);
        let cv = match self {
            Method::IvPile | Method::IvPileSplit => {
                wsvm::cross_validate(table, cfg, &grid.lambdas, &grid.sigmas, grid.folds, cv_seed)?
            }
            Method::Owl => wsvm::cross_validate_owl(table, cfg, &grid.lambdas, &grid.sigmas, grid.folds, cv_seed)?,
            Method::PlugIn | Method::CoinFlip => return Ok((self.fit(table, cfg)?, None)),
        };
        let tuned = PipelineConfig { lambda: cv.lambda, kernel: KernelSpec::gaussian(cv.sigma)?, ..*cfg };
        Ok((self.fit(table, &tuned)?, Some(cv)))
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "ivpile" => Method::IvPile,
            "ivpile-split" => Method::IvPileSplit,
            "plugin" => Method::PlugIn,
            "owl" => Method::Owl,
            "coin" | "coin-flip" => Method::CoinFlip,
            other => return Err(Error::arg(format!("unknown method `{other}`"))),
        })
    }
}
