//! C interface to the `lmm-wkb` engine.
//!
//! Every fallible call returns an [`LmmStatus`]; on failure the message is kept
//! per thread and read with [`lmm_last_error`]. Engines are opaque and must be
//! released with [`lmm_engine_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lmm_wkb::bermudan::{AndersenPolicy, BermudanPayoff};
use lmm_wkb::estimators::{EuropeanPayoff, KernelLevel, DEFAULT_BUMP};
use lmm_wkb::harness::{policy_for, tables, ExperimentConfig, TableSpec};
use lmm_wkb::lmm::{LiborModel, ModelConfig};
use lmm_wkb::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    Numeric = 4,
    Calibration = 5,
    Config = 6,
    Io = 7,
    /// No exercise policy has been calibrated or loaded.
    NoPolicy = 8,
    Panic = 9,
}

/// Estimator levels accepted by the pricing calls.
pub const LMM_LEVEL_LOGNORMAL: i32 = 0;
pub const LMM_LEVEL_WKB0: i32 = 1;
pub const LMM_LEVEL_WKB1: i32 = 2;
pub const LMM_LEVEL_EULER: i32 = 3;

/// Pass as `delta_component` to request a price.
pub const LMM_PRICE: i64 = -1;

/// Monte Carlo estimate in basis points of unit notional.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LmmEstimate {
    pub value: f64,
    pub std_dev: f64,
    pub samples: u64,
}

/// Opaque model handle.
pub struct LmmEngine {
    model: LiborModel,
    policy: Option<AndersenPolicy>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LmmStatus {
    match e {
        Error::InvalidParameter { .. } => LmmStatus::InvalidParameter,
        Error::Domain { .. } => LmmStatus::Domain,
        Error::Numeric { .. } => LmmStatus::Numeric,
        Error::Calibration(_) => LmmStatus::Calibration,
        Error::Config { .. } => LmmStatus::Config,
        Error::Io { .. } => LmmStatus::Io,
    }
}

enum Failure {
    Status(LmmStatus, String),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Engine(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LmmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LmmStatus::Ok
        }
        Ok(Err(Failure::Engine(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LmmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(LmmStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Failure::Status(LmmStatus::InvalidParameter, "path is not UTF-8".into()))
}

fn level_arg(level: i32) -> Result<KernelLevel, Failure> {
    Ok(match level {
        LMM_LEVEL_LOGNORMAL => KernelLevel::Lognormal,
        LMM_LEVEL_WKB0 => KernelLevel::Wkb0,
        LMM_LEVEL_WKB1 => KernelLevel::Wkb1,
        LMM_LEVEL_EULER => KernelLevel::Euler,
        other => return Err(Failure::Status(LmmStatus::InvalidParameter, format!("unknown level {other}"))),
    })
}

fn install(config: ModelConfig, out: *mut *mut LmmEngine) -> Result<(), Failure> {
    let engine = LmmEngine {
        model: LiborModel::new(config)?,
        policy: None,
    };
    unsafe { *out = Box::into_raw(Box::new(engine)) };
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn lmm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Case-study model with `n` semi-annual rates starting at `t1`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn lmm_engine_new_case_study(n: usize, t1: f64, out: *mut *mut LmmEngine) -> LmmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "need at least one rate".into(),
            }
            .into());
        }
        install(ModelConfig::case_study(n, t1), out)
    })
}

/// Model from a `key = value` experiment file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn lmm_engine_from_config(path: *const c_char, out: *mut *mut LmmEngine) -> LmmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ExperimentConfig::load(path_arg(path)?)?;
        install(config.model, out)
    })
}

/// Releases an engine; null is ignored.
///
/// # Safety
/// `engine` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lmm_engine_free(engine: *mut LmmEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Number of forward rates, or 0 for a null handle.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lmm_engine_num_rates(engine: *const LmmEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.model.n())
}

/// Calibrates exercise thresholds on `paths` pre-simulated paths.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lmm_engine_calibrate_policy(engine: *mut LmmEngine, paths: usize, seed: u64) -> LmmStatus {
    guard(|| {
        let e = engine.as_mut().ok_or_else(|| null("engine"))?;
        e.policy = Some(policy_for(e.model.config(), paths, seed)?);
        Ok(())
    })
}

/// Loads a policy file written by the command-line tool.
///
/// # Safety
/// `engine` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lmm_engine_load_policy(engine: *mut LmmEngine, path: *const c_char) -> LmmStatus {
    guard(|| {
        let e = engine.as_mut().ok_or_else(|| null("engine"))?;
        let p = AndersenPolicy::load(path_arg(path)?)?;
        p.check(&e.model)?;
        e.policy = Some(p);
        Ok(())
    })
}

/// Writes the current policy to `path`.
///
/// # Safety
/// `engine` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lmm_engine_save_policy(engine: *const LmmEngine, path: *const c_char) -> LmmStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        let p = e.policy.as_ref().ok_or(Failure::Status(LmmStatus::NoPolicy, "no policy".into()))?;
        p.save(path_arg(path)?)?;
        Ok(())
    })
}

unsafe fn run(
    engine: *const LmmEngine,
    bermudan: bool,
    level: i32,
    samples: usize,
    seed: u64,
    delta_component: i64,
    out: *mut LmmEstimate,
) -> LmmStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let level = level_arg(level)?;
        let n = e.model.n();
        let component = match delta_component {
            LMM_PRICE => None,
            i if i >= 0 && (i as usize) < n => Some(i as usize),
            i => {
                return Err(Failure::Status(
                    LmmStatus::InvalidParameter,
                    format!("delta component {i} outside 0..{n}"),
                ))
            }
        };
        let mut spec = TableSpec::new(e.model.config().clone());
        spec.samples = samples;
        spec.seed = seed;
        spec.h = DEFAULT_BUMP;
        let r = if bermudan {
            let policy = e.policy.clone().ok_or(Failure::Status(
                LmmStatus::NoPolicy,
                "calibrate or load a policy first".into(),
            ))?;
            tables::estimate(&e.model, level, &BermudanPayoff::new(&e.model, policy)?, component, &spec)?
        } else {
            tables::estimate(&e.model, level, &EuropeanPayoff::new(&e.model)?, component, &spec)?
        };
        *out = LmmEstimate {
            value: r.value,
            std_dev: r.std_dev,
            samples: r.samples as u64,
        };
        Ok(())
    })
}

/// European swaption price, or its Delta with respect to rate
/// `delta_component` (0-based) unless that is `LMM_PRICE`.
///
/// # Safety
/// `engine` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lmm_european(
    engine: *const LmmEngine,
    level: i32,
    samples: usize,
    seed: u64,
    delta_component: i64,
    out: *mut LmmEstimate,
) -> LmmStatus {
    run(engine, false, level, samples, seed, delta_component, out)
}

/// Bermudan counterpart of [`lmm_european`]; needs a policy.
///
/// # Safety
/// `engine` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lmm_bermudan(
    engine: *const LmmEngine,
    level: i32,
    samples: usize,
    seed: u64,
    delta_component: i64,
    out: *mut LmmEstimate,
) -> LmmStatus {
    run(engine, true, level, samples, seed, delta_component, out)
}
