//! C ABI over the `ssregime` estimators.
//!
//! Every entry point returns an [`SsrStatus`] and writes results through
//! out-pointers. Datasets and fits are opaque handles owned by the caller
//! and released with `ssr_dataset_free` / `ssr_fit_free`; strings returned
//! by the library are released with `ssr_string_free`. On failure the
//! message is available from `ssr_last_error_message` on the same thread.
//!
//! Matrices are passed row-major, one observation per row.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ssregime::cli::FitReport;
use ssregime::data::{load_csv, Dataset, Observation};
use ssregime::estimators::{fit_regime, BandwidthChoice, DecisionRule, FitOptions, FitOutcome, Method};
use ssregime::propensity::{PropensityOptions, DEFAULT_CLIP_EPS};
use ssregime::simulation::{run_study, SimConfig};
use ssregime::Error;

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(non_camel_case_types)]
pub enum SsrStatus {
    SSR_OK = 0,
    /// A required pointer argument was null.
    SSR_NULL_POINTER = 1,
    /// Malformed arguments, files or data.
    SSR_INVALID_INPUT = 2,
    /// Rank deficiency, separation, an empty arm or similar.
    SSR_NUMERICAL = 3,
    /// Too many simulation replications failed.
    SSR_TOO_MANY_FAILURES = 4,
    /// An output buffer was shorter than required.
    SSR_BUFFER_TOO_SMALL = 5,
    /// An internal panic was caught at the boundary.
    SSR_INTERNAL = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(non_camel_case_types)]
pub enum SsrMethod {
    SSR_METHOD_TR = 0,
    SSR_METHOD_NP = 1,
    SSR_METHOD_SS = 2,
}

/// Estimation settings; obtain defaults from `ssr_fit_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsrFitOptions {
    pub method: SsrMethod,
    pub kfolds: usize,
    /// Bandwidth on the standardized scale; zero or negative selects it by
    /// cross-validation.
    pub bandwidth: f64,
    pub clip_eps: f64,
    pub seed: u64,
}

/// Opaque dataset handle.
pub struct SsrDataset {
    inner: Dataset,
}

/// Opaque fit handle.
pub struct SsrFit {
    outcome: FitOutcome,
    seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SsrStatus, msg: impl Into<String>) -> SsrStatus {
    set_error(msg.into());
    status
}

fn from_error(err: Error) -> SsrStatus {
    let status = match &err {
        Error::TooManyFailures { .. } => SsrStatus::SSR_TOO_MANY_FAILURES,
        e if e.is_numerical() => SsrStatus::SSR_NUMERICAL,
        _ => SsrStatus::SSR_INVALID_INPUT,
    };
    fail(status, err.to_string())
}

/// Runs `f`, converting panics into `SSR_INTERNAL`.
fn guard(f: impl FnOnce() -> SsrStatus) -> SsrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SsrStatus::SSR_INTERNAL, format!("internal error: {msg}"))
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, SsrStatus> {
    if p.is_null() {
        return Err(fail(SsrStatus::SSR_NULL_POINTER, format!("{name} is null")));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(SsrStatus::SSR_INVALID_INPUT, format!("{name} is not valid UTF-8"))),
    }
}

fn string_out(s: String, out: *mut *mut c_char) -> SsrStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SsrStatus::SSR_OK
        }
        Err(_) => fail(SsrStatus::SSR_INTERNAL, "string contains a nul byte"),
    }
}

/// Message describing the most recent failure on this thread, or null.
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ssr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ssr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a labeled CSV (header `x1,...,xp,a,y`) and an optional unlabeled
/// CSV (header `x1,...,xp`; pass null to omit).
#[no_mangle]
pub unsafe extern "C" fn ssr_dataset_from_csv(
    labeled_path: *const c_char,
    unlabeled_path: *const c_char,
    out: *mut *mut SsrDataset,
) -> SsrStatus {
    guard(|| {
        if out.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "out is null");
        }
        let labeled = match path_arg(labeled_path, "labeled_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let unlabeled = if unlabeled_path.is_null() {
            None
        } else {
            match path_arg(unlabeled_path, "unlabeled_path") {
                Ok(p) => Some(p),
                Err(s) => return s,
            }
        };
        match load_csv(&labeled, unlabeled.as_deref()) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(SsrDataset { inner: ds }));
                SsrStatus::SSR_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Builds a dataset from row-major arrays: `x_labeled` is `n x p`, `a` and
/// `y` have length `n`, `x_unlabeled` is `big_n x p` (may be null when
/// `big_n` is zero).
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ssr_dataset_new(
    x_labeled: *const f64,
    a: *const u8,
    y: *const f64,
    n: usize,
    x_unlabeled: *const f64,
    big_n: usize,
    p: usize,
    out: *mut *mut SsrDataset,
) -> SsrStatus {
    guard(|| {
        if out.is_null() || (n > 0 && (x_labeled.is_null() || a.is_null() || y.is_null())) {
            return fail(SsrStatus::SSR_NULL_POINTER, "null data pointer");
        }
        if big_n > 0 && x_unlabeled.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "x_unlabeled is null");
        }
        if p == 0 {
            return fail(SsrStatus::SSR_INVALID_INPUT, "p must be positive");
        }
        let slice = |ptr: *const f64, len: usize| -> &[f64] {
            if len == 0 {
                &[]
            } else {
                std::slice::from_raw_parts(ptr, len)
            }
        };
        let xl = slice(x_labeled, n * p);
        let av = if n == 0 { &[][..] } else { std::slice::from_raw_parts(a, n) };
        let yv = slice(y, n);
        let xu = slice(x_unlabeled, big_n * p);
        let labeled: Vec<Observation> = (0..n)
            .map(|i| Observation::labeled(xl[i * p..(i + 1) * p].to_vec(), av[i], yv[i]))
            .collect();
        let unlabeled: Vec<Observation> = xu.chunks(p).map(|r| Observation::unlabeled(r.to_vec())).collect();
        match Dataset::new(labeled, unlabeled) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(SsrDataset { inner: ds }));
                SsrStatus::SSR_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Labeled size, unlabeled size and covariate dimension. Any out-pointer
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn ssr_dataset_dims(
    ds: *const SsrDataset,
    n: *mut usize,
    big_n: *mut usize,
    p: *mut usize,
) -> SsrStatus {
    guard(|| {
        let Some(ds) = ds.as_ref() else {
            return fail(SsrStatus::SSR_NULL_POINTER, "dataset is null");
        };
        if !n.is_null() {
            *n = ds.inner.n();
        }
        if !big_n.is_null() {
            *big_n = ds.inner.big_n();
        }
        if !p.is_null() {
            *p = ds.inner.p();
        }
        SsrStatus::SSR_OK
    })
}

#[no_mangle]
pub unsafe extern "C" fn ssr_dataset_free(ds: *mut SsrDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// SS estimator, 5 folds, cross-validated bandwidth, clipping at 0.01,
/// seed 0.
#[no_mangle]
pub extern "C" fn ssr_fit_options_default() -> SsrFitOptions {
    SsrFitOptions {
        method: SsrMethod::SSR_METHOD_SS,
        kfolds: 5,
        bandwidth: 0.0,
        clip_eps: DEFAULT_CLIP_EPS,
        seed: 0,
    }
}

/// Estimates a treatment regime. `options` may be null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit(
    ds: *const SsrDataset,
    options: *const SsrFitOptions,
    out: *mut *mut SsrFit,
) -> SsrStatus {
    guard(|| {
        let Some(ds) = ds.as_ref() else {
            return fail(SsrStatus::SSR_NULL_POINTER, "dataset is null");
        };
        if out.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "out is null");
        }
        let o = options.as_ref().copied().unwrap_or_else(|| ssr_fit_options_default());
        let method = match o.method {
            SsrMethod::SSR_METHOD_TR => Method::Tr,
            SsrMethod::SSR_METHOD_NP => Method::Np,
            SsrMethod::SSR_METHOD_SS => Method::Ss,
        };
        if o.kfolds < 2 {
            return fail(SsrStatus::SSR_INVALID_INPUT, "kfolds must be at least 2");
        }
        let opts = FitOptions {
            method,
            kfolds: o.kfolds,
            bandwidth: if o.bandwidth > 0.0 {
                BandwidthChoice::Fixed(o.bandwidth)
            } else {
                BandwidthChoice::Auto
            },
            grid: None,
            propensity: PropensityOptions {
                clip_eps: o.clip_eps,
                ..Default::default()
            },
            seed: o.seed,
        };
        match fit_regime(&ds.inner, &opts) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(SsrFit { outcome, seed: o.seed }));
                SsrStatus::SSR_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of coefficients, `p + 1`.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit_dim(fit: *const SsrFit, out: *mut usize) -> SsrStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return fail(SsrStatus::SSR_NULL_POINTER, "fit is null");
        };
        if out.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "out is null");
        }
        *out = fit.outcome.fit.dim();
        SsrStatus::SSR_OK
    })
}

unsafe fn copy_vector(fit: *const SsrFit, out: *mut f64, len: usize, pick: impl FnOnce(&SsrFit) -> Vec<f64>) -> SsrStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return fail(SsrStatus::SSR_NULL_POINTER, "fit is null");
        };
        if out.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "out is null");
        }
        let v = pick(fit);
        if len < v.len() {
            return fail(
                SsrStatus::SSR_BUFFER_TOO_SMALL,
                format!("buffer holds {len} values, {} required", v.len()),
            );
        }
        std::slice::from_raw_parts_mut(out, v.len()).copy_from_slice(&v);
        SsrStatus::SSR_OK
    })
}

/// Coefficients on the standardized covariate scale.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit_beta(fit: *const SsrFit, out: *mut f64, len: usize) -> SsrStatus {
    copy_vector(fit, out, len, |f| f.outcome.fit.beta.clone())
}

/// Standard errors on the standardized covariate scale.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit_se(fit: *const SsrFit, out: *mut f64, len: usize) -> SsrStatus {
    copy_vector(fit, out, len, |f| f.outcome.fit.se.clone())
}

/// Coefficients on the raw covariate scale.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit_beta_raw(fit: *const SsrFit, out: *mut f64, len: usize) -> SsrStatus {
    copy_vector(fit, out, len, |f| f.outcome.fit.beta_raw())
}

/// Standard errors on the raw covariate scale.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit_se_raw(fit: *const SsrFit, out: *mut f64, len: usize) -> SsrStatus {
    copy_vector(fit, out, len, |f| f.outcome.fit.se_raw())
}

/// Selected bandwidth, or NaN for the TR estimator.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit_bandwidth(fit: *const SsrFit, out: *mut f64) -> SsrStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return fail(SsrStatus::SSR_NULL_POINTER, "fit is null");
        };
        if out.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "out is null");
        }
        *out = fit.outcome.fit.bandwidth.unwrap_or(f64::NAN);
        SsrStatus::SSR_OK
    })
}

/// Applies the fitted rule to `rows x p` raw covariates, writing 1 (treat)
/// or 0 per row into `out`.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit_decide(
    fit: *const SsrFit,
    x: *const f64,
    rows: usize,
    p: usize,
    out: *mut u8,
) -> SsrStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return fail(SsrStatus::SSR_NULL_POINTER, "fit is null");
        };
        if rows == 0 {
            return SsrStatus::SSR_OK;
        }
        if x.is_null() || out.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "null data pointer");
        }
        let rule: DecisionRule = fit.outcome.fit.rule();
        if p != rule.p() {
            return from_error(Error::DimensionMismatch {
                expected: rule.p(),
                found: p,
            });
        }
        let xs = std::slice::from_raw_parts(x, rows * p);
        let dst = std::slice::from_raw_parts_mut(out, rows);
        for (d, row) in dst.iter_mut().zip(xs.chunks(p)) {
            *d = rule.decide(row);
        }
        SsrStatus::SSR_OK
    })
}

/// Fit report as JSON, in the same format the command-line `fit` writes.
/// Release with `ssr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ssr_fit_to_json(fit: *const SsrFit, out: *mut *mut c_char) -> SsrStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return fail(SsrStatus::SSR_NULL_POINTER, "fit is null");
        };
        if out.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "out is null");
        }
        let report = FitReport::from_outcome(&fit.outcome, fit.seed);
        string_out(serde_json::to_string_pretty(&report).expect("report serializes"), out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn ssr_fit_free(fit: *mut SsrFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Runs a simulation study described by a JSON object and returns the
/// study report as JSON. `model` and `baseline` are required; any other
/// configuration field (`n`, `N`, `replications`, `seed`, ...) overrides
/// its default.
#[no_mangle]
pub unsafe extern "C" fn ssr_simulate_json(config_json: *const c_char, out: *mut *mut c_char) -> SsrStatus {
    guard(|| {
        if config_json.is_null() || out.is_null() {
            return fail(SsrStatus::SSR_NULL_POINTER, "null argument");
        }
        let Ok(text) = CStr::from_ptr(config_json).to_str() else {
            return fail(SsrStatus::SSR_INVALID_INPUT, "config is not valid UTF-8");
        };
        let cfg = match parse_sim_config(text) {
            Ok(c) => c,
            Err(msg) => return fail(SsrStatus::SSR_INVALID_INPUT, msg),
        };
        if let Err(e) = cfg.validate() {
            return from_error(e);
        }
        match run_study(&cfg) {
            Ok(report) => string_out(serde_json::to_string_pretty(&report).expect("report serializes"), out),
            Err(e) => from_error(e),
        }
    })
}

fn parse_sim_config(text: &str) -> Result<SimConfig, String> {
    use serde_json::Value;
    let Value::Object(overrides) = serde_json::from_str::<Value>(text).map_err(|e| e.to_string())? else {
        return Err("config must be a JSON object".into());
    };
    fn field<T: serde::de::DeserializeOwned>(obj: &serde_json::Map<String, Value>, k: &str) -> Result<T, String> {
        let v = obj.get(k).cloned().ok_or_else(|| format!("config requires \"{k}\""))?;
        serde_json::from_value(v).map_err(|e| format!("{k}: {e}"))
    }
    let base = SimConfig::new(field(&overrides, "model")?, field(&overrides, "baseline")?);
    let Value::Object(mut merged) = serde_json::to_value(base).expect("config serializes") else {
        unreachable!("config serializes to an object")
    };
    for (k, v) in overrides {
        if !merged.contains_key(&k) {
            return Err(format!("unknown config field \"{k}\""));
        }
        merged.insert(k, v);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| e.to_string())
}
