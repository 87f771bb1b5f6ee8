//! Replicated train/evaluate loops over a shared test draw.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::scenario::{Oracle, SimScenario, DEFAULT_QUAD_NODES};
use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::estimators::{Method, PipelineConfig};
use crate::risk::{benchmark_risk, c_dgp_rows, MeanSe};
use crate::rng;
use crate::wsvm::TuningGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Settings shared by every method unless overridden.
    pub pipeline: PipelineConfig,
    /// Per-method settings (the seed field is ignored and re-derived per replication).
    pub overrides: BTreeMap<&'static str, PipelineConfig>,
    /// Worker threads for replications; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub n_quad: usize,
    /// When set, each replication picks `λ` and `σ` per method by cross-validation on its
    /// training table.
    pub tuning: Option<TuningGrid>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::IvPile, Method::Owl, Method::CoinFlip],
            pipeline: PipelineConfig::default(),
            overrides: BTreeMap::new(),
            jobs: None,
            n_quad: DEFAULT_QUAD_NODES,
            tuning: None,
        }
    }
}

impl ExperimentConfig {
    pub fn config_for(&self, method: Method) -> PipelineConfig {
        self.overrides.get(method.name()).copied().unwrap_or(self.pipeline)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    /// Mean and standard error over replications of `R(f, f_omni)`.
    pub vs_omni: MeanSe,
    /// Mean and standard error over replications of `R(f, f_opt)`.
    pub vs_opt: MeanSe,
    pub per_rep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scenario: SimScenario,
    /// Value gap between the omniscient and the best covariate-only rule on the test draw.
    pub c_dgp: f64,
    /// Empirical compliance of the test draw (zero for designs without an instrument).
    pub test_compliance: f64,
    pub rows: Vec<MethodSummary>,
}

/// Replication `r`'s master seed.
pub fn replication_seed(seed: u64, r: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(seed, rng::label::REPLICATION), r as u64)
}

/// The evaluation table shared by every replication of a run with master seed `seed`.
pub fn test_draw(scn: &SimScenario, seed: u64) -> Result<(ObservationTable, Oracle)> {
    scn.generate(scn.n_test, rng::derive_seed(seed, rng::label::TEST_SET))
}

/// Replication `r`'s training table.
pub fn training_draw(scn: &SimScenario, seed: u64, r: usize) -> Result<(ObservationTable, Oracle)> {
    scn.generate(scn.n_train, rng::derive_seed(replication_seed(seed, r), 0))
}

fn method_slot(m: Method) -> u64 {
    match m {
        Method::IvPile => 1,
        Method::IvPileSplit => 2,
        Method::PlugIn => 3,
        Method::Owl => 4,
        Method::CoinFlip => 5,
    }
}

/// Runs `scn.reps` replications. Each trains every method on a fresh table and scores it against
/// the oracle effects of one test draw shared by all methods and replications.
pub fn run_experiment(scn: &SimScenario, cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentResult> {
    scn.validate()?;
    if cfg.methods.is_empty() {
        return Err(Error::arg("no methods requested"));
    }
    if scn.n_train < 2 || scn.n_test == 0 {
        return Err(Error::arg("n_train must be at least 2 and n_test at least 1"));
    }
    let (test, oracle) = test_draw(scn, seed)?;
    let test_x = test.x().view();
    let cate = oracle.cate_rows(test_x);
    let cate_x = oracle.cate_x_rows(test_x, cfg.n_quad);
    let test_compliance =
        if scn.family.has_instrument() { super::scenario::compliance(&test).unwrap_or(f64::NAN) } else { 0.0 };

    let one_rep = |r: usize| -> Result<Vec<(f64, f64)>> {
        let rep_seed = replication_seed(seed, r);
        let (train, _) = training_draw(scn, seed, r)?;
        cfg.methods
            .iter()
            .map(|&m| {
                let pc = PipelineConfig { seed: rng::derive_seed(rep_seed, method_slot(m)), ..cfg.config_for(m) };
                let fitted = match &cfg.tuning {
                    Some(grid) => m.fit_tuned(&train, &pc, grid).map(|(f, _)| f),
                    None => m.fit(&train, &pc),
                };
                let fit = fitted.map_err(|e| Error::State(format!("replication {r}, method {}: {e}", m.name())))?;
                let signs = fit.rule.signs(test_x);
                let b = benchmark_risk(&signs, &cate, &cate_x)?;
                Ok((b.vs_omni.mean, b.vs_opt.mean))
            })
            .collect()
    };
    let run = || (0..scn.reps).into_par_iter().map(one_rep).collect::<Result<Vec<_>>>();
    let per_rep = match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::State(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let rows = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let omni: Vec<f64> = per_rep.iter().map(|v| v[k].0).collect();
            let opt: Vec<f64> = per_rep.iter().map(|v| v[k].1).collect();
            MethodSummary { method, vs_omni: MeanSe::of(&omni), vs_opt: MeanSe::of(&opt), per_rep: omni }
        })
        .collect();
    Ok(ExperimentResult { scenario: *scn, c_dgp: c_dgp_rows(&cate, &cate_x), test_compliance, rows })
}

pub const RESULTS_HEADER: &str =
    "family,lambda,xi,delta,alpha,c,g1,g2,n_train,n_test,reps,method,r_omni,se_omni,r_opt,se_opt,c_dgp";

impl ExperimentResult {
    /// One CSV row per method with the scenario columns repeated.
    pub fn to_csv(&self) -> String {
        let s = &self.scenario;
        let mut out = String::from(RESULTS_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.family,
                s.lambda,
                s.xi,
                s.delta,
                s.alpha,
                s.c,
                s.g1.index(),
                s.g2.index(),
                s.n_train,
                s.n_test,
                s.reps,
                row.method.name(),
                row.vs_omni.mean,
                row.vs_omni.se,
                row.vs_opt.mean,
                row.vs_opt.se,
                self.c_dgp
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Fixed-width table for terminals.
    pub fn pretty(&self) -> String {
        let mut out = format!("{:<14}{:>10}{:>10}{:>10}{:>10}\n", "method", "R_omni", "(se)", "R_opt", "(se)");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<14}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
                row.method.name(),
                row.vs_omni.mean,
                row.vs_omni.se,
                row.vs_opt.mean,
                row.vs_opt.se
            );
        }
        let _ = writeln!(out, "{:<14}{:>10.4}", "C_DGP", self.c_dgp);
        out
    }

    pub fn row(&self, method: Method) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }
}
