//! Run configuration: TOML sections mirrored by flags, merged as flag > file > default.
//!
//! Every field is optional while parsing so that a flag can override a single key of a file.
//! `resolve` then fills defaults, and the resolved sections are what a manifest records.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundMethod;
use crate::data::{OutcomeKind, Schema};
use crate::estimators::{Method, PipelineConfig};
use crate::nuisance::{EstimatorKind, ForestConfig, LogitConfig};
use crate::simlab::scenario::DEFAULT_QUAD_NODES;
use crate::simlab::{ExperimentConfig, Family, SimScenario};
use crate::wsvm::{log_grid, KernelSpec, SolverOptions, TuningGrid};

/// Environment variable consulted when neither a flag nor the config file sets the seed.
pub const SEED_ENV: &str = "IVPILE_SEED";

/// Seeds must fit a TOML integer so manifests can record them.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    Flag,
    File,
    Env,
    Default,
}

impl SeedSource {
    pub fn name(self) -> &'static str {
        match self {
            SeedSource::Flag => "flag",
            SeedSource::File => "config",
            SeedSource::Env => "env",
            SeedSource::Default => "default",
        }
    }
}

/// Options every subcommand takes.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML config file; flags override its keys
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed for all randomness (fallback: config file, then IVPILE_SEED, then 0)
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    pub seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Input table and column mapping.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Input CSV with a header row
    #[arg(long, value_name = "CSV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Covariate columns, comma separated (default: all other columns)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_cols: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_col: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_col: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_col: Option<String>,
    /// Read 0/1 coded z, a (and a binary y) as -1/+1
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remap_binary: Option<bool>,
    /// Outcome type: binary, bounded (needs --k0 --k1) or unbounded
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    /// Lower end of a bounded outcome
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
    /// Upper end of a bounded outcome
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
}

impl DataSection {
    pub fn resolve(mut self) -> Self {
        self.z_col.get_or_insert_with(|| "z".into());
        self.a_col.get_or_insert_with(|| "a".into());
        self.y_col.get_or_insert_with(|| "y".into());
        self.remap_binary.get_or_insert(false);
        self.outcome.get_or_insert_with(|| "binary".into());
        self
    }

    pub fn input(&self) -> Result<&Path, String> {
        self.input.as_deref().ok_or_else(|| "no input file (set --input or data.input)".into())
    }

    pub fn schema(&self, exclude: &[String]) -> Schema {
        Schema {
            x_cols: self.x_cols.clone().unwrap_or_default(),
            z_col: self.z_col.clone().unwrap_or_else(|| "z".into()),
            a_col: self.a_col.clone().unwrap_or_else(|| "a".into()),
            y_col: self.y_col.clone().unwrap_or_else(|| "y".into()),
            remap_binary: self.remap_binary.unwrap_or(false),
            exclude: exclude.to_vec(),
        }
    }

    pub fn outcome_kind(&self) -> Result<OutcomeKind, String> {
        match self.outcome.as_deref().unwrap_or("binary") {
            "binary" => Ok(OutcomeKind::Binary),
            "unbounded" => Ok(OutcomeKind::Unbounded),
            "bounded" => match (self.k0, self.k1) {
                (Some(k0), Some(k1)) => OutcomeKind::bounded(k0, k1).map_err(|e| e.to_string()),
                _ => Err("a bounded outcome needs k0 and k1".into()),
            },
            other => Err(format!("unknown outcome type `{other}` (binary, bounded, unbounded)")),
        }
    }
}

/// Nuisance estimator settings.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuisanceSection {
    /// Nuisance estimator: rf or logit
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
    /// Trees per random forest
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<usize>,
    /// Largest node a forest leaves unsplit
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_size: Option<usize>,
    /// Features tried per split (default: sqrt(d) for classification, d/3 for regression)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtry: Option<usize>,
    /// Bootstrap rows per tree
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<bool>,
    /// Ridge penalty of the logistic model
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    /// Newton iterations of the logistic model
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logit_max_iter: Option<usize>,
    /// Convergence tolerance of the logistic model
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logit_tol: Option<f64>,
}

impl NuisanceSection {
    pub fn resolve(mut self) -> Self {
        let (f, l) = (ForestConfig::default(), LogitConfig::default());
        self.estimator.get_or_insert_with(|| "rf".into());
        self.n_trees.get_or_insert(f.n_trees);
        self.node_size.get_or_insert(f.node_size);
        self.bootstrap.get_or_insert(f.bootstrap);
        self.l2.get_or_insert(l.l2);
        self.logit_max_iter.get_or_insert(l.max_iter);
        self.logit_tol.get_or_insert(l.tol);
        self
    }

    pub fn kind(&self) -> Result<EstimatorKind, String> {
        let (f, l) = (ForestConfig::default(), LogitConfig::default());
        match self.estimator.as_deref().unwrap_or("rf") {
            "rf" | "forest" => Ok(EstimatorKind::RandomForest(ForestConfig {
                n_trees: self.n_trees.unwrap_or(f.n_trees),
                node_size: self.node_size.unwrap_or(f.node_size),
                mtry: self.mtry.or(f.mtry),
                bootstrap: self.bootstrap.unwrap_or(f.bootstrap),
            })),
            "logit" => Ok(EstimatorKind::MultinomialLogit(LogitConfig {
                l2: self.l2.unwrap_or(l.l2),
                max_iter: self.logit_max_iter.unwrap_or(l.max_iter),
                tol: self.logit_tol.unwrap_or(l.tol),
            })),
            other => Err(format!("unknown estimator `{other}` (rf or logit)")),
        }
    }
}

/// Bound family and labeling margin.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    /// Bounds: bp, sid (binary outcome) or mp (bounded outcome)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<String>,
    /// Margin subtracted from both interval ends before labeling
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl BoundsSection {
    pub fn resolve(mut self, outcome: OutcomeKind) -> Self {
        self.bound
            .get_or_insert_with(|| if matches!(outcome, OutcomeKind::Bounded { .. }) { "mp" } else { "bp" }.into());
        self.delta.get_or_insert(0.0);
        self
    }

    pub fn method(&self, outcome: OutcomeKind) -> Result<BoundMethod, String> {
        parse_bound(self.bound.as_deref().unwrap_or("bp"), outcome)
    }
}

fn parse_bound(name: &str, outcome: OutcomeKind) -> Result<BoundMethod, String> {
    match name {
        "bp" => Ok(BoundMethod::BalkePearl),
        "sid" => Ok(BoundMethod::Siddique),
        "mp" => match outcome {
            OutcomeKind::Bounded { k0, k1 } => BoundMethod::manski_pepper(k0, k1).map_err(|e| e.to_string()),
            _ => Err("bound `mp` needs a bounded outcome".into()),
        },
        other => Err(format!("unknown bound `{other}` (bp, sid or mp)")),
    }
}

fn tuning_grid(min: f64, max: f64, points: usize, folds: usize) -> Result<TuningGrid, String> {
    let g = log_grid(min, max, points).map_err(|e| e.to_string())?;
    if folds < 2 {
        return Err("cross-validation needs at least 2 folds".into());
    }
    Ok(TuningGrid { lambdas: g.clone(), sigmas: g, folds })
}

/// Rule estimator and classifier settings.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    /// Estimator: ivpile, ivpile-split, plugin, owl or coin
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Kernel: gaussian or linear
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Penalty of the weighted SVM
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Gaussian bandwidth in exp(-|x-x'|^2 / sigma^2)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Choose lambda and sigma by cross-validation
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<bool>,
    /// Smallest grid value for both lambda and sigma
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_min: Option<f64>,
    /// Largest grid value for both lambda and sigma
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_max: Option<f64>,
    /// Log-spaced grid points
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Cross-validation folds
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    /// Target relative duality gap of the dual solver
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_tol: Option<f64>,
    /// Pair updates allowed (default 10 n^2)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_max_iter: Option<usize>,
}

impl SvmSection {
    pub fn resolve(mut self) -> Self {
        let p = PipelineConfig::default();
        self.method.get_or_insert_with(|| "ivpile".into());
        self.kernel.get_or_insert_with(|| "gaussian".into());
        self.lambda.get_or_insert(p.lambda);
        if self.kernel.as_deref() == Some("gaussian") {
            self.sigma.get_or_insert(1.0);
        }
        self.cv.get_or_insert(false);
        self.grid_min.get_or_insert(1e-3);
        self.grid_max.get_or_insert(1e3);
        self.grid_points.get_or_insert(7);
        self.folds.get_or_insert(5);
        self.solver_tol.get_or_insert(p.solver.tol);
        self
    }

    pub fn method(&self) -> Result<Method, String> {
        self.method.as_deref().unwrap_or("ivpile").parse().map_err(|e: crate::Error| e.to_string())
    }

    pub fn kernel(&self) -> Result<KernelSpec, String> {
        match self.kernel.as_deref().unwrap_or("gaussian") {
            "gaussian" => KernelSpec::gaussian(self.sigma.unwrap_or(1.0)).map_err(|e| e.to_string()),
            "linear" => Ok(KernelSpec::Linear),
            other => Err(format!("unknown kernel `{other}` (gaussian or linear)")),
        }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions { tol: self.solver_tol.unwrap_or(SolverOptions::default().tol), max_iter: self.solver_max_iter }
    }

    /// The tuning grid when cross-validation is on.
    pub fn tuning(&self) -> Result<Option<TuningGrid>, String> {
        if !self.cv.unwrap_or(false) {
            return Ok(None);
        }
        tuning_grid(
            self.grid_min.unwrap_or(1e-3),
            self.grid_max.unwrap_or(1e3),
            self.grid_points.unwrap_or(7),
            self.folds.unwrap_or(5),
        )
        .map(Some)
    }
}

/// Simulation design and protocol.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// Design: main-binary, continuous-truncnorm, owl-failure-continuous or owl-failure-binary
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Strength of the hidden confounder in treatment uptake
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Hidden-confounder coefficient in the baseline outcome term
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    /// Hidden-confounder coefficient in the treatment-effect term
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Instrument strength
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Direct instrument effect on the outcome
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Baseline term model: 1 or 2
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1: Option<String>,
    /// Treatment-effect term model: 1 or 2
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Methods to compare, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    /// Worker threads for replications
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Gauss-Legendre nodes for integrating out the hidden confounder
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_quad: Option<usize>,
    /// Bounds for binary designs: bp or sid
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<String>,
    /// Labeling margin of the interval methods
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    /// SVM penalty when not cross-validating
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    /// Gaussian bandwidth when not cross-validating
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Tune penalty and bandwidth per replication and method by cross-validation
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    /// Also write the first training table and the test table with oracle effects
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emit_data: Option<bool>,
}

impl SimulateSection {
    pub fn resolve(mut self) -> Result<Self, String> {
        let d = SimScenario::default();
        let family: Family =
            self.family.get_or_insert_with(|| d.family.to_string()).parse().map_err(|e: crate::Error| e.to_string())?;
        self.lambda.get_or_insert(d.lambda);
        self.xi.get_or_insert(d.xi);
        self.delta.get_or_insert(d.delta);
        self.alpha.get_or_insert(d.alpha);
        self.c.get_or_insert(d.c);
        self.g1.get_or_insert_with(|| d.g1.index().to_string());
        self.g2.get_or_insert_with(|| d.g2.index().to_string());
        self.n_train.get_or_insert(d.n_train);
        self.n_test.get_or_insert(d.n_test);
        self.reps.get_or_insert(d.reps);
        self.methods.get_or_insert_with(|| {
            let m: &[&str] = if family.has_instrument() { &["ivpile", "owl", "coin"] } else { &["owl", "coin"] };
            m.iter().map(|s| s.to_string()).collect()
        });
        self.n_quad.get_or_insert(DEFAULT_QUAD_NODES);
        if family.has_instrument() {
            let b = if family == Family::ContinuousTruncNormal { "mp" } else { "bp" };
            self.bound.get_or_insert_with(|| b.into());
        }
        self.margin.get_or_insert(0.0);
        self.penalty.get_or_insert(PipelineConfig::default().lambda);
        self.sigma.get_or_insert(1.0);
        self.cv.get_or_insert(true);
        self.grid_min.get_or_insert(1e-3);
        self.grid_max.get_or_insert(1e3);
        self.grid_points.get_or_insert(7);
        self.folds.get_or_insert(5);
        self.emit_data.get_or_insert(false);
        Ok(self)
    }

    pub fn scenario(&self, seed: u64) -> Result<SimScenario, String> {
        let d = SimScenario::default();
        let e = |e: crate::Error| e.to_string();
        let scn = SimScenario {
            family: self.family.as_deref().map_or(Ok(d.family), str::parse).map_err(e)?,
            lambda: self.lambda.unwrap_or(d.lambda),
            xi: self.xi.unwrap_or(d.xi),
            delta: self.delta.unwrap_or(d.delta),
            alpha: self.alpha.unwrap_or(d.alpha),
            c: self.c.unwrap_or(d.c),
            g1: self.g1.as_deref().map_or(Ok(d.g1), str::parse).map_err(e)?,
            g2: self.g2.as_deref().map_or(Ok(d.g2), str::parse).map_err(e)?,
            n_train: self.n_train.unwrap_or(d.n_train),
            n_test: self.n_test.unwrap_or(d.n_test),
            reps: self.reps.unwrap_or(d.reps),
            seed,
        };
        scn.validate().map_err(|e| e.to_string())?;
        Ok(scn)
    }

    pub fn experiment(&self, scn: &SimScenario, estimator: EstimatorKind) -> Result<ExperimentConfig, String> {
        let methods: Vec<Method> = self
            .methods
            .as_deref()
            .unwrap_or_default()
            .iter()
            .map(|m| m.parse().map_err(|e: crate::Error| e.to_string()))
            .collect::<Result<_, _>>()?;
        if methods.is_empty() {
            return Err("no methods requested".into());
        }
        let needs_iv = |m: &Method| matches!(m, Method::IvPile | Method::IvPileSplit | Method::PlugIn);
        if !scn.family.has_instrument() && methods.iter().any(needs_iv) {
            return Err(format!("family `{}` has no instrument; use owl or coin", scn.family));
        }
        let bound = match (scn.family.has_instrument(), self.bound.as_deref()) {
            (false, _) => BoundMethod::BalkePearl,
            (true, b) => {
                let default = if scn.family == Family::ContinuousTruncNormal { "mp" } else { "bp" };
                parse_bound(b.unwrap_or(default), scn.family.outcome())?
            }
        };
        let pipeline = PipelineConfig {
            estimator,
            bound,
            delta: self.margin.unwrap_or(0.0),
            kernel: KernelSpec::gaussian(self.sigma.unwrap_or(1.0)).map_err(|e| e.to_string())?,
            lambda: self.penalty.unwrap_or(PipelineConfig::default().lambda),
            ..PipelineConfig::default()
        };
        let tuning = if self.cv.unwrap_or(true) {
            Some(tuning_grid(
                self.grid_min.unwrap_or(1e-3),
                self.grid_max.unwrap_or(1e3),
                self.grid_points.unwrap_or(7),
                self.folds.unwrap_or(5),
            )?)
        } else {
            None
        };
        if self.jobs == Some(0) {
            return Err("--jobs must be at least 1".into());
        }
        Ok(ExperimentConfig {
            methods,
            pipeline,
            jobs: self.jobs,
            n_quad: self.n_quad.unwrap_or(DEFAULT_QUAD_NODES).max(1),
            tuning,
            ..ExperimentConfig::default()
        })
    }
}

/// Rule file to apply.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// Rule file written by `train`
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<PathBuf>,
}

/// Rule file and optional oracle effect columns.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Rule file written by `train`
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<PathBuf>,
    /// Column with the true effect given all variables (enables R_omni)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cate_col: Option<String>,
    /// Column with the true effect given covariates only (enables R_opt and C_DGP)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cate_x_col: Option<String>,
}

impl EvaluateSection {
    pub fn oracle_columns(&self) -> Vec<String> {
        self.cate_col.iter().chain(&self.cate_x_col).cloned().collect()
    }
}

/// Config file layout. A `[manifest]` table (present in written manifests) is ignored.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: Option<DataSection>,
    pub nuisance: Option<NuisanceSection>,
    pub bounds: Option<BoundsSection>,
    pub svm: Option<SvmSection>,
    pub simulate: Option<SimulateSection>,
    pub predict: Option<PredictSection>,
    pub evaluate: Option<EvaluateSection>,
    pub manifest: Option<toml::Table>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: FileConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.seed.is_some_and(|s| s > MAX_SEED) {
            return Err("seed exceeds the largest supported value".into());
        }
        Ok(cfg)
    }
}

/// Flag values replace file values key by key.
pub fn overlay<T: Serialize + DeserializeOwned>(file: Option<T>, flags: T) -> Result<T, String> {
    let table = |v: &T| match toml::Value::try_from(v) {
        Ok(toml::Value::Table(t)) => Ok(t),
        Ok(_) => Err("section is not a table".to_string()),
        Err(e) => Err(e.to_string()),
    };
    let mut base = match &file {
        Some(f) => table(f)?,
        None => toml::Table::new(),
    };
    base.extend(table(&flags)?);
    toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| e.to_string())
}

/// Seed by precedence flag > file > environment > 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<(u64, SeedSource), String> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    if let Some(s) = file {
        return Ok((s, SeedSource::File));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(s) if s <= MAX_SEED => Ok((s, SeedSource::Env)),
            _ => Err(format!("{SEED_ENV}=`{v}` is not a valid seed")),
        },
        Err(_) => Ok((0, SeedSource::Default)),
    }
}

#[derive(Debug, Serialize)]
pub struct ManifestInfo {
    pub subcommand: String,
    pub version: String,
    pub seed_source: String,
    pub outputs: Vec<String>,
}

/// Resolved configuration of one run. Written as TOML, it is itself a valid config file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub out: PathBuf,
    pub manifest: ManifestInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nuisance: Option<NuisanceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svm: Option<SvmSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<EvaluateSection>,
}

impl Manifest {
    pub fn new(subcommand: &str, seed: u64, source: SeedSource, out: &Path) -> Self {
        Manifest {
            seed,
            out: out.to_path_buf(),
            manifest: ManifestInfo {
                subcommand: subcommand.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed_source: source.name().into(),
                outputs: Vec::new(),
            },
            data: None,
            nuisance: None,
            bounds: None,
            svm: None,
            simulate: None,
            predict: None,
            evaluate: None,
        }
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_keys_one_by_one() {
        let file = SvmSection { lambda: Some(0.5), sigma: Some(2.0), ..Default::default() };
        let flags = SvmSection { sigma: Some(3.0), ..Default::default() };
        let m = overlay(Some(file), flags).unwrap();
        assert_eq!((m.lambda, m.sigma), (Some(0.5), Some(3.0)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::parse("[svm]\nlamda = 1.0\n").is_err());
        assert!(FileConfig::parse("colour = 1\n").is_err());
        let ok = FileConfig::parse("seed = 4\n[svm]\nlambda = 1.0\n[manifest]\nanything = 1\n").unwrap();
        assert_eq!(ok.seed, Some(4));
    }

    #[test]
    fn resolved_simulate_section_reparses() {
        let s = SimulateSection::default().resolve().unwrap();
        let mut m = Manifest::new("simulate", 3, SeedSource::Flag, Path::new("o"));
        m.simulate = Some(s.clone());
        let back = FileConfig::parse(&m.to_toml().unwrap()).unwrap();
        let s2 = back.simulate.unwrap();
        assert_eq!(toml::to_string(&s2).unwrap(), toml::to_string(&s).unwrap());
        assert_eq!(back.seed, Some(3));
    }
}
