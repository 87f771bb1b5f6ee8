//! C ABI for the ivpile library.
//!
//! Every function returns an `IvpileStatus`. On failure a message describing the error is kept
//! per thread and can be copied out with `ivpile_last_error_message`. Handles are opaque and
//! must be released with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ivpile::bounds::{self, EightProbs};
use ivpile::data::{ObservationTable, OutcomeKind};
use ivpile::estimators::{Method, PipelineConfig};
use ivpile::nuisance::{EstimatorKind, ForestConfig, LogitConfig};
use ivpile::wsvm::{KernelSpec, TreatmentRule};
use ivpile::Error;
use ndarray::ArrayView2;

/// Result of every exported call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvpileStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Schema = 3,
    Domain = 4,
    DegenerateFit = 5,
    Numerical = 6,
    Io = 7,
    Format = 8,
    Panic = 9,
}

/// Which closed-form interval to compute for a binary outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvpileBound {
    BalkePearl = 0,
    Siddique = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvpileMethod {
    IvPile = 0,
    IvPileSplit = 1,
    PlugIn = 2,
    Owl = 3,
    CoinFlip = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvpileNuisance {
    Forest = 0,
    Logit = 1,
}

/// Fit settings. `sigma <= 0` selects the linear kernel.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IvpileFitConfig {
    pub method: IvpileMethod,
    pub nuisance: IvpileNuisance,
    pub bound: IvpileBound,
    pub delta: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub seed: u64,
}

/// Observations with a binary outcome. Opaque.
pub struct IvpileTable(ObservationTable);

/// A fitted or loaded treatment rule. Opaque.
pub struct IvpileRule(TreatmentRule);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> IvpileStatus {
    match err {
        Error::Schema(_) => IvpileStatus::Schema,
        Error::Parse { .. } | Error::Format { .. } | Error::Csv(_) => IvpileStatus::Format,
        Error::Domain { .. } => IvpileStatus::Domain,
        Error::InvalidArgument(_) | Error::State(_) => IvpileStatus::InvalidArgument,
        Error::DegenerateFit(_) => IvpileStatus::DegenerateFit,
        Error::Numerical(_) => IvpileStatus::Numerical,
        Error::Io { .. } => IvpileStatus::Io,
    }
}

/// Internal failure: a status plus its message.
struct Fail(IvpileStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(IvpileStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IvpileStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            IvpileStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            IvpileStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(IvpileStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// # Safety
/// `x` must be null or point to `n * d` readable doubles.
unsafe fn matrix<'a>(x: *const f64, n: usize, d: usize) -> Result<ArrayView2<'a, f64>, Fail> {
    let cells = n.checked_mul(d).ok_or_else(|| Fail(IvpileStatus::InvalidArgument, "n * d overflows".into()))?;
    ArrayView2::from_shape((n, d), slice(x, cells, "x")?)
        .map_err(|e| Fail(IvpileStatus::InvalidArgument, e.to_string()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ivpile_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to
/// `cap - 1` bytes) and returns the full message length without the terminator. Passing a null
/// `buf` or zero `cap` only queries the length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ivpile_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let k = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, k);
            *buf.add(k) = 0;
        }
        msg.len()
    })
}

/// Effect interval from the eight cell probabilities. `plus` and `minus` hold the instrument
/// arms z = +1 and z = -1, each ordered (y,a) = (+,+), (+,-), (-,+), (-,-).
///
/// # Safety
/// `plus` and `minus` must point to 4 doubles; `out_l` and `out_u` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivpile_bounds(
    bound: IvpileBound,
    plus: *const f64,
    minus: *const f64,
    out_l: *mut f64,
    out_u: *mut f64,
) -> IvpileStatus {
    guard(|| {
        if out_l.is_null() || out_u.is_null() {
            return Err(null("output"));
        }
        let plus: [f64; 4] = slice(plus, 4, "plus")?.try_into().unwrap();
        let minus: [f64; 4] = slice(minus, 4, "minus")?.try_into().unwrap();
        let p = EightProbs::from_arms(plus, minus)?;
        let iv = match bound {
            IvpileBound::BalkePearl => bounds::balke_pearl(&p)?,
            IvpileBound::Siddique => bounds::siddique(&p)?,
        };
        *out_l = iv.l;
        *out_u = iv.u;
        Ok(())
    })
}

/// Builds a table from row-major covariates `x` (n by d) and columns `z`, `a`, `y` in {-1, +1}.
///
/// # Safety
/// `x` must point to `n * d` doubles, `z`, `a`, `y` to `n` doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivpile_table_new(
    x: *const f64,
    n: usize,
    d: usize,
    z: *const f64,
    a: *const f64,
    y: *const f64,
    out: *mut *mut IvpileTable,
) -> IvpileStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let xs = matrix(x, n, d)?.to_owned();
        let col = |p, what| slice(p, n, what).map(<[f64]>::to_vec);
        let table = ObservationTable::new(xs, col(z, "z")?, col(a, "a")?, col(y, "y")?, OutcomeKind::Binary)?;
        *out = Box::into_raw(Box::new(IvpileTable(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle from `ivpile_table_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ivpile_table_free(table: *mut IvpileTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

fn pipeline(cfg: &IvpileFitConfig) -> PipelineConfig {
    PipelineConfig {
        estimator: match cfg.nuisance {
            IvpileNuisance::Forest => EstimatorKind::RandomForest(ForestConfig::default()),
            IvpileNuisance::Logit => EstimatorKind::MultinomialLogit(LogitConfig::default()),
        },
        bound: match cfg.bound {
            IvpileBound::BalkePearl => bounds::BoundMethod::BalkePearl,
            IvpileBound::Siddique => bounds::BoundMethod::Siddique,
        },
        delta: cfg.delta,
        kernel: if cfg.sigma > 0.0 { KernelSpec::Gaussian { sigma: cfg.sigma } } else { KernelSpec::Linear },
        lambda: cfg.lambda,
        seed: cfg.seed,
        ..PipelineConfig::default()
    }
}

/// Default settings: IV-PILE with forest nuisance, Balke-Pearl bounds, Gaussian kernel.
#[no_mangle]
pub extern "C" fn ivpile_fit_config_default() -> IvpileFitConfig {
    let p = PipelineConfig::default();
    IvpileFitConfig {
        method: IvpileMethod::IvPile,
        nuisance: IvpileNuisance::Forest,
        bound: IvpileBound::BalkePearl,
        delta: p.delta,
        sigma: match p.kernel {
            KernelSpec::Gaussian { sigma } => sigma,
            KernelSpec::Linear => 0.0,
        },
        lambda: p.lambda,
        seed: p.seed,
    }
}

/// Fits a rule on `table`.
///
/// # Safety
/// `table` must be a live handle, `cfg` must point to a config and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivpile_fit(
    table: *const IvpileTable,
    cfg: *const IvpileFitConfig,
    out: *mut *mut IvpileRule,
) -> IvpileStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let table = table.as_ref().ok_or_else(|| null("table"))?;
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let method = match cfg.method {
            IvpileMethod::IvPile => Method::IvPile,
            IvpileMethod::IvPileSplit => Method::IvPileSplit,
            IvpileMethod::PlugIn => Method::PlugIn,
            IvpileMethod::Owl => Method::Owl,
            IvpileMethod::CoinFlip => Method::CoinFlip,
        };
        let fitted = method.fit(&table.0, &pipeline(cfg))?;
        *out = Box::into_raw(Box::new(IvpileRule(fitted.rule)));
        Ok(())
    })
}

/// Writes decision values for `n` rows of row-major covariates into `out_values`. The
/// recommendation is +1 where the value is positive and -1 otherwise.
///
/// # Safety
/// `rule` must be a live handle, `x` must point to `n * d` doubles and `out_values` to `n`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ivpile_rule_decisions(
    rule: *const IvpileRule,
    x: *const f64,
    n: usize,
    d: usize,
    out_values: *mut f64,
) -> IvpileStatus {
    guard(|| {
        let rule = rule.as_ref().ok_or_else(|| null("rule"))?;
        if out_values.is_null() && n > 0 {
            return Err(null("out_values"));
        }
        rule.0.check_dim(d)?;
        let xs = matrix(x, n, d)?;
        let values = rule.0.decisions(xs);
        if n > 0 {
            ptr::copy_nonoverlapping(values.as_ptr(), out_values, n);
        }
        Ok(())
    })
}

/// Saves `rule` as a text rule file.
///
/// # Safety
/// `rule` must be a live handle and `file` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn ivpile_rule_save(rule: *const IvpileRule, file: *const c_char) -> IvpileStatus {
    guard(|| {
        let rule = rule.as_ref().ok_or_else(|| null("rule"))?;
        ivpile::rulefile::save(&rule.0, path(file)?)?;
        Ok(())
    })
}

/// Loads a rule file written by `ivpile_rule_save` or the command-line tool.
///
/// # Safety
/// `file` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ivpile_rule_load(file: *const c_char, out: *mut *mut IvpileRule) -> IvpileStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let rule = ivpile::rulefile::load(path(file)?)?;
        *out = Box::into_raw(Box::new(IvpileRule(rule)));
        Ok(())
    })
}

/// # Safety
/// `rule` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ivpile_rule_free(rule: *mut IvpileRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}
