//! Command-line front end: `simulate`, `bounds`, `train`, `predict` and `evaluate`.
//!
//! Each run resolves its settings (flag > config file > default), writes its outputs to the
//! output directory and records the resolved settings in `<subcommand>-manifest.toml` there.
//! A manifest is a valid config file, so `--config <manifest>` repeats the run.

pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::bounds::estimate_intervals;
use crate::data::{self, ObservationTable};
use crate::estimators::{fit_nuisance, PipelineConfig};
use crate::risk::{benchmark_risk, risk_upper_of_signs, weighted_misclassification_signs, RiskReport};
use crate::rulefile;
use crate::simlab::{self, run_experiment};
use crate::wsvm::TreatmentRule;

pub use config::{
    BoundsSection, Common, DataSection, EvaluateSection, FileConfig, Manifest, NuisanceSection, PredictSection,
    SeedSource, SimulateSection, SvmSection, SEED_ENV,
};

const DEFAULT_OUT: &str = "ivpile-out";

#[derive(Debug, Parser)]
#[command(
    name = "ivpile",
    version,
    about = "Treatment rules from instrumental-variable data under partial identification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replicated simulation comparing rule estimators; writes results.csv
    Simulate(SimulateCmd),
    /// Estimated effect bounds per row; writes bounds.csv
    Bounds(BoundsCmd),
    /// Fit a treatment rule; writes rule.txt (and cv.csv with --cv)
    Train(TrainCmd),
    /// Apply a rule file to a CSV; writes predictions.csv
    Predict(PredictCmd),
    /// Risk of a rule file on a CSV; writes report.csv
    Evaluate(EvaluateCmd),
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub simulate: SimulateSection,
    #[command(flatten)]
    pub nuisance: NuisanceSection,
}

#[derive(Debug, Args)]
pub struct BoundsCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataSection,
    #[command(flatten)]
    pub nuisance: NuisanceSection,
    #[command(flatten)]
    pub bounds: BoundsSection,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataSection,
    #[command(flatten)]
    pub nuisance: NuisanceSection,
    #[command(flatten)]
    pub bounds: BoundsSection,
    #[command(flatten)]
    pub svm: SvmSection,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub predict: PredictSection,
    #[command(flatten)]
    pub data: DataSection,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub evaluate: EvaluateSection,
    #[command(flatten)]
    pub data: DataSection,
    #[command(flatten)]
    pub nuisance: NuisanceSection,
    #[command(flatten)]
    pub bounds: BoundsSection,
}

/// Where a run failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Fit,
    Evaluate,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Fit => "fit",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// Configuration mistakes are usage errors; everything else is a pipeline error.
    pub fn exit_code(&self) -> i32 {
        if self.stage == Stage::Config {
            2
        } else {
            1
        }
    }
}

trait At<T> {
    fn at(self, stage: Stage) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> At<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|e| CliError { stage, message: e.to_string() })
    }
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("ivpile: error {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command and returns the text meant for standard output.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Bounds(c) => bounds(c),
        Command::Train(c) => train(c),
        Command::Predict(c) => predict(c),
        Command::Evaluate(c) => evaluate(c),
    }
}

/// Shared start of every run: the file config, seed and output directory.
struct Run {
    file: FileConfig,
    manifest: Manifest,
    out: PathBuf,
}

impl Run {
    fn start(name: &str, common: &Common) -> Result<Run, CliError> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p).at(Stage::Config)?,
            None => FileConfig::default(),
        };
        let (seed, source) = config::resolve_seed(common.seed, file.seed).at(Stage::Config)?;
        let out = common.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into());
        let manifest = Manifest::new(name, seed, source, &out);
        Ok(Run { file, manifest, out })
    }

    fn seed(&self) -> u64 {
        self.manifest.seed
    }

    fn output(&mut self, name: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| format!("{}: {e}", self.out.display())).at(Stage::Write)?;
        self.manifest.manifest.outputs.push(name.into());
        Ok(self.out.join(name))
    }

    fn finish(mut self, mut summary: String) -> Result<String, CliError> {
        let name = format!("{}-manifest.toml", self.manifest.manifest.subcommand);
        let path = self.output(&name)?;
        let text = self.manifest.to_toml().at(Stage::Write)?;
        std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display())).at(Stage::Write)?;
        let _ = writeln!(summary, "manifest: {}", path.display());
        Ok(summary)
    }
}

fn load_table(data: &DataSection, exclude: &[String]) -> Result<ObservationTable, CliError> {
    let outcome = data.outcome_kind().at(Stage::Config)?;
    let input = data.input().at(Stage::Config)?;
    data::load_csv(input, &data.schema(exclude), outcome).at(Stage::Load)
}

fn load_rule(path: Option<&Path>) -> Result<TreatmentRule, CliError> {
    let path = path.ok_or("no rule file (set --rule)").at(Stage::Config)?;
    rulefile::load(path).at(Stage::Load)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())).at(Stage::Write)
}

fn simulate(cmd: SimulateCmd) -> Result<String, CliError> {
    let mut run = Run::start("simulate", &cmd.common)?;
    let sim = config::overlay(run.file.simulate.take(), cmd.simulate).at(Stage::Config)?.resolve().at(Stage::Config)?;
    let nuisance = config::overlay(run.file.nuisance.take(), cmd.nuisance).at(Stage::Config)?.resolve();
    let scn = sim.scenario(run.seed()).at(Stage::Config)?;
    let exp = sim.experiment(&scn, nuisance.kind().at(Stage::Config)?).at(Stage::Config)?;

    let result = run_experiment(&scn, &exp, run.seed()).at(Stage::Fit)?;
    let results = run.output("results.csv")?;
    result.write_csv(&results).at(Stage::Write)?;
    let summary = format!("{}results: {}\n", result.pretty(), results.display());

    if sim.emit_data == Some(true) {
        let (train, _) = simlab::training_draw(&scn, run.seed(), 0).at(Stage::Fit)?;
        let path = run.output("train.csv")?;
        data::write_csv(&train, &path).at(Stage::Write)?;
        let (test, oracle) = simlab::test_draw(&scn, run.seed()).at(Stage::Fit)?;
        let cate = oracle.cate_rows(test.x().view());
        let cate_x = oracle.cate_x_rows(test.x().view(), exp.n_quad);
        let path = run.output("test.csv")?;
        data::write_csv_with(&test, &[("cate", &cate), ("cate_x", &cate_x)], &path).at(Stage::Write)?;
    }
    run.manifest.simulate = Some(sim);
    run.manifest.nuisance = Some(nuisance);
    run.finish(summary)
}

/// Data, nuisance and bounds sections shared by `bounds`, `train` and `evaluate`.
fn pipeline_sections(
    run: &mut Run,
    data: DataSection,
    nuisance: NuisanceSection,
    bounds: BoundsSection,
) -> Result<(DataSection, NuisanceSection, BoundsSection, PipelineConfig), CliError> {
    let data = config::overlay(run.file.data.take(), data).at(Stage::Config)?.resolve();
    let outcome = data.outcome_kind().at(Stage::Config)?;
    let nuisance = config::overlay(run.file.nuisance.take(), nuisance).at(Stage::Config)?.resolve();
    let bounds = config::overlay(run.file.bounds.take(), bounds).at(Stage::Config)?.resolve(outcome);
    let cfg = PipelineConfig {
        estimator: nuisance.kind().at(Stage::Config)?,
        bound: bounds.method(outcome).at(Stage::Config)?,
        delta: bounds.delta.unwrap_or(0.0),
        seed: run.seed(),
        ..PipelineConfig::default()
    };
    Ok((data, nuisance, bounds, cfg))
}

fn bounds(cmd: BoundsCmd) -> Result<String, CliError> {
    let mut run = Run::start("bounds", &cmd.common)?;
    let (data, nuisance, bounds, cfg) = pipeline_sections(&mut run, cmd.data, cmd.nuisance, cmd.bounds)?;
    let table = load_table(&data, &[])?;
    let model = fit_nuisance(&table, &cfg).at(Stage::Fit)?;
    let intervals = estimate_intervals(&model, table.x().view(), cfg.bound, cfg.delta).at(Stage::Fit)?;

    let mut text = String::from("row,l,u,reconciled\n");
    for (i, iv) in intervals.iter().enumerate() {
        let _ = writeln!(text, "{i},{},{},{}", iv.l, iv.u, u8::from(iv.reconciled));
    }
    let path = run.output("bounds.csv")?;
    write_text(&path, &text)?;
    let covering = intervals.iter().filter(|iv| iv.covers_zero()).count();
    let reconciled = intervals.iter().filter(|iv| iv.reconciled).count();
    let summary = format!(
        "rows: {}\ncovering zero: {covering}\nreconciled: {reconciled}\nbounds: {}\n",
        intervals.len(),
        path.display()
    );
    run.manifest.data = Some(data);
    run.manifest.nuisance = Some(nuisance);
    run.manifest.bounds = Some(bounds);
    run.finish(summary)
}

fn train(cmd: TrainCmd) -> Result<String, CliError> {
    let mut run = Run::start("train", &cmd.common)?;
    let (data, nuisance, bounds, base) = pipeline_sections(&mut run, cmd.data, cmd.nuisance, cmd.bounds)?;
    let svm = config::overlay(run.file.svm.take(), cmd.svm).at(Stage::Config)?.resolve();
    let method = svm.method().at(Stage::Config)?;
    let cfg = PipelineConfig {
        kernel: svm.kernel().at(Stage::Config)?,
        lambda: svm.lambda.unwrap_or(base.lambda),
        solver: svm.solver(),
        ..base
    };
    let tuning = svm.tuning().at(Stage::Config)?;
    let table = load_table(&data, &[])?;

    let (fitted, cv) = match &tuning {
        Some(grid) => method.fit_tuned(&table, &cfg, grid).at(Stage::Fit)?,
        None => (method.fit(&table, &cfg).at(Stage::Fit)?, None),
    };
    let path = run.output("rule.txt")?;
    rulefile::save(&fitted.rule, &path).at(Stage::Write)?;
    let r = &fitted.report;
    let mut summary = format!(
        "method: {}\nrows: {}\nlabeled: {}\nunlabeled: {}\nreconciled: {}\nconverged: {}\nrule: {}\n",
        method.name(),
        table.n(),
        r.n_labeled,
        r.n_unlabeled,
        r.n_reconciled,
        r.converged,
        path.display()
    );
    if let Some(cv) = cv {
        let mut text = String::from("lambda,sigma,score\n");
        for s in &cv.scores {
            let _ = writeln!(text, "{},{},{}", s.lambda, s.sigma, s.score);
        }
        let path = run.output("cv.csv")?;
        write_text(&path, &text)?;
        let _ = writeln!(summary, "cv: lambda {} sigma {} ({})", cv.lambda, cv.sigma, path.display());
    }
    run.manifest.data = Some(data);
    run.manifest.nuisance = Some(nuisance);
    run.manifest.bounds = Some(bounds);
    run.manifest.svm = Some(svm);
    run.finish(summary)
}

fn predict(cmd: PredictCmd) -> Result<String, CliError> {
    let mut run = Run::start("predict", &cmd.common)?;
    let pred = config::overlay(run.file.predict.take(), cmd.predict).at(Stage::Config)?;
    let data = config::overlay(run.file.data.take(), cmd.data).at(Stage::Config)?.resolve();
    let rule = load_rule(pred.rule.as_deref())?;
    let xs = data::load_covariates(data.input().at(Stage::Config)?, &data.schema(&[])).at(Stage::Load)?;
    rule.check_dim(xs.ncols()).at(Stage::Load)?;

    let decisions = rule.decisions(xs.view());
    let mut text = String::from("row,decision,sign\n");
    let mut treated = 0;
    for (i, &f) in decisions.iter().enumerate() {
        let s = crate::transform::sgn(f);
        treated += usize::from(s > 0.0);
        let _ = writeln!(text, "{i},{f},{s}");
    }
    let path = run.output("predictions.csv")?;
    write_text(&path, &text)?;
    let summary = format!("rows: {}\ntreated: {treated}\npredictions: {}\n", decisions.len(), path.display());
    run.manifest.predict = Some(pred);
    run.manifest.data = Some(data);
    run.finish(summary)
}

fn evaluate(cmd: EvaluateCmd) -> Result<String, CliError> {
    let mut run = Run::start("evaluate", &cmd.common)?;
    let ev = config::overlay(run.file.evaluate.take(), cmd.evaluate).at(Stage::Config)?;
    let (data, nuisance, bounds, cfg) = pipeline_sections(&mut run, cmd.data, cmd.nuisance, cmd.bounds)?;
    let rule = load_rule(ev.rule.as_deref())?;
    let table = load_table(&data, &ev.oracle_columns())?;
    rule.check_dim(table.d()).at(Stage::Load)?;
    let input = data.input().at(Stage::Config)?;
    let column = |name: &Option<String>| -> Result<Option<Vec<f64>>, CliError> {
        name.as_deref().map(|c| data::load_column(input, c)).transpose().at(Stage::Load)
    };
    let (cate, cate_x) = (column(&ev.cate_col)?, column(&ev.cate_x_col)?);

    let model = Arc::new(fit_nuisance(&table, &cfg).at(Stage::Fit)?);
    let intervals = estimate_intervals(&model, table.x().view(), cfg.bound, cfg.delta).at(Stage::Fit)?;
    let signs = rule.signs(table.x().view());
    let mut report = risk_upper_of_signs(&signs, &intervals).at(Stage::Evaluate)?;
    match (&cate, &cate_x) {
        (Some(c), Some(cx)) => {
            let b = benchmark_risk(&signs, c, cx).at(Stage::Evaluate)?;
            report.r_vs_omni = Some(b.vs_omni.mean);
            report.r_vs_opt = Some(b.vs_opt.mean);
            report.c_dgp = Some(b.c_dgp);
        }
        (Some(c), None) => {
            report.r_vs_omni = Some(weighted_misclassification_signs(&signs, c).at(Stage::Evaluate)?.mean);
        }
        (None, Some(_)) => return Err("--cate-x-col needs --cate-col").at(Stage::Config),
        (None, None) => {}
    }
    let path = run.output("report.csv")?;
    write_text(&path, &report_csv(&report))?;
    let summary = format!("{}report: {}\n", report_pretty(&report), path.display());
    run.manifest.evaluate = Some(ev);
    run.manifest.data = Some(data);
    run.manifest.nuisance = Some(nuisance);
    run.manifest.bounds = Some(bounds);
    run.finish(summary)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report_csv(r: &RiskReport) -> String {
    format!(
        "n_eval,r_upper,se_upper,r_label,r_unlabel,r_omni,r_opt,c_dgp\n{},{},{},{},{},{},{},{}\n",
        r.n_eval,
        r.r_upper,
        r.se_upper,
        r.r_label,
        r.r_unlabel,
        opt(r.r_vs_omni),
        opt(r.r_vs_opt),
        opt(r.c_dgp)
    )
}

pub fn report_pretty(r: &RiskReport) -> String {
    let mut s = format!(
        "{:<10}{:>12}\n{:<10}{:>12.6}\n{:<10}{:>12.6}\n{:<10}{:>12.6}\n{:<10}{:>12.6}\n",
        "rows", r.n_eval, "R_upper", r.r_upper, "(se)", r.se_upper, "labeled", r.r_label, "unlabeled", r.r_unlabel
    );
    for (name, v) in [("R_omni", r.r_vs_omni), ("R_opt", r.r_vs_opt), ("C_DGP", r.c_dgp)] {
        if let Some(v) = v {
            let _ = writeln!(s, "{name:<10}{v:>12.6}");
        }
    }
    s
}
