//! C ABI for the contmeas engine.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns a [`CmStatus`];
//! on failure [`cm_last_error`] describes the cause. Panics are caught at
//! the boundary and reported as `CM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use contmeas::config::{parse, LoadedConfig};
use contmeas::evolution::{evolve, EvolutionResult};
use contmeas::statistics::{invert_counting, joint_charfunc};
use contmeas::{check_dissipativity, dpo_model, DpoParams, Error, ModelSpec, TestFunction, TruncatedSpace};
use num_complex::Complex64;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    InvalidArgument = 1,
    Config = 2,
    Validation = 3,
    Integration = 4,
    Inversion = 5,
    Panic = 6,
}

/// Degenerate parametric oscillator parameters with equal splitting of the
/// decay channels.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CmDpoParams {
    pub omega_c: f64,
    pub g: f64,
    pub kappa: f64,
    pub nbar: f64,
    pub kappa_p: f64,
    pub nbar_p: f64,
    pub theta3: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
}

/// Opaque model handle.
pub struct CmModel {
    model: ModelSpec,
}

/// Opaque parsed run configuration.
pub struct CmRun {
    loaded: LoadedConfig,
}

/// Opaque evolution result.
pub struct CmEvolution {
    result: EvolutionResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CmStatus {
    match e.exit_code() {
        2 => CmStatus::Config,
        3 => CmStatus::Validation,
        4 => CmStatus::Integration,
        5 => CmStatus::Inversion,
        _ => CmStatus::Validation,
    }
}

fn invalid(msg: &str) -> CmStatus {
    set_error(msg);
    CmStatus::InvalidArgument
}

/// Run `f` behind a panic guard, recording errors.
fn guard(f: impl FnOnce() -> Result<(), CmStatus>) -> CmStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            CmStatus::Panic
        }
    }
}

fn lift<T>(r: contmeas::Result<T>) -> Result<T, CmStatus> {
    r.map_err(|e| {
        set_error(&e.to_string());
        status_of(&e)
    })
}

/// Message for the last failed call on this thread. Empty after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build the oscillator model on the `(n_max, m_max)` truncation.
///
/// # Safety
/// `params` must point to a valid `CmDpoParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_dpo_model_new(
    params: *const CmDpoParams,
    n_max: usize,
    m_max: usize,
    out: *mut *mut CmModel,
) -> CmStatus {
    if params.is_null() || out.is_null() {
        return invalid("null pointer argument");
    }
    let p = *params;
    guard(|| {
        let s = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
        let dpo = lift(DpoParams::from_splits(
            p.omega_c,
            p.g,
            p.kappa,
            p.nbar,
            p.kappa_p,
            p.nbar_p,
            [s; 3],
            [s; 3],
            p.theta3,
            Complex64::new(p.lambda_re, p.lambda_im),
        ))?;
        let model = lift(dpo_model(&dpo, TruncatedSpace::new(n_max, m_max)))?;
        *out = Box::into_raw(Box::new(CmModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`cm_dpo_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_model_free(model: *mut CmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hilbert-space dimension of the truncation, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_model_dim(model: *const CmModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.space().dim())
}

/// Largest dissipativity residual on the interior of the truncation.
///
/// # Safety
/// `model` must be a live handle; `max_residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_model_check_dissipativity(
    model: *const CmModel,
    guard_width: usize,
    seed: u64,
    max_residual: *mut f64,
) -> CmStatus {
    let Some(m) = model.as_ref() else {
        return invalid("null model");
    };
    if max_residual.is_null() {
        return invalid("null output pointer");
    }
    guard(|| {
        let rep = lift(check_dissipativity(&m.model, guard_width, 32, seed))?;
        *max_residual = rep.max_residual;
        Ok(())
    })
}

/// Parse a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_run_from_toml(toml: *const c_char, out: *mut *mut CmRun) -> CmStatus {
    if toml.is_null() || out.is_null() {
        return invalid("null pointer argument");
    }
    let Ok(text) = CStr::from_ptr(toml).to_str() else {
        return invalid("configuration is not valid UTF-8");
    };
    guard(|| {
        let loaded = lift(parse(text))?;
        lift(loaded.config.context())?;
        *out = Box::into_raw(Box::new(CmRun { loaded }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`cm_run_from_toml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_run_free(run: *mut CmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Evolve with the configured test function and store `Phi(t)` at the
/// configured stride.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_run_evolve(run: *const CmRun, out: *mut *mut CmEvolution) -> CmStatus {
    let Some(r) = run.as_ref() else {
        return invalid("null run");
    };
    if out.is_null() {
        return invalid("null output pointer");
    }
    guard(|| {
        let cfg = &r.loaded.config;
        let ctx = lift(cfg.context())?;
        let rho0 = lift(cfg.initial_state())?;
        let ecfg = lift(cfg.evolution())?;
        let result = lift(evolve(&ctx, &rho0, &ecfg))?;
        *out = Box::into_raw(Box::new(CmEvolution { result }));
        Ok(())
    })
}

/// Number of stored time points, 0 for a null handle.
///
/// # Safety
/// `ev` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_evolution_len(ev: *const CmEvolution) -> usize {
    ev.as_ref().map_or(0, |e| e.result.times.len())
}

/// Copy the stored times into `out[0..len]`; `len` must equal
/// [`cm_evolution_len`].
///
/// # Safety
/// `ev` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_evolution_times(ev: *const CmEvolution, out: *mut f64, len: usize) -> CmStatus {
    let Some(e) = ev.as_ref() else {
        return invalid("null evolution");
    };
    if out.is_null() || len != e.result.times.len() {
        return invalid("output buffer missing or of the wrong length");
    }
    ptr::copy_nonoverlapping(e.result.times.as_ptr(), out, len);
    CmStatus::Ok
}

/// Copy `Phi` at the stored times into `re[0..len]` and `im[0..len]`.
///
/// # Safety
/// `ev` must be a live handle; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_evolution_phi(ev: *const CmEvolution, re: *mut f64, im: *mut f64, len: usize) -> CmStatus {
    let Some(e) = ev.as_ref() else {
        return invalid("null evolution");
    };
    if re.is_null() || im.is_null() || len != e.result.phi.len() {
        return invalid("output buffers missing or of the wrong length");
    }
    for (i, z) in e.result.phi.iter().enumerate() {
        *re.add(i) = z.re;
        *im.add(i) = z.im;
    }
    CmStatus::Ok
}

/// # Safety
/// `ev` must come from [`cm_run_evolve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_evolution_free(ev: *mut CmEvolution) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Joint characteristic function on the configured `[grid]`, row-major over
/// the increments. `*needed` receives the number of grid points; if `len` is
/// smaller, nothing is computed and `CM_STATUS_INVALID_ARGUMENT` is returned.
///
/// # Safety
/// `run` must be a live handle; `re`, `im` must hold `len` doubles (or be
/// null with `len == 0`); `needed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_run_charfunc(
    run: *const CmRun,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    needed: *mut usize,
) -> CmStatus {
    let Some(r) = run.as_ref() else {
        return invalid("null run");
    };
    if needed.is_null() {
        return invalid("null output pointer");
    }
    guard(|| {
        let cfg = &r.loaded.config;
        let base = lift(cfg.context())?;
        let ctx = lift(base.with_test_function(TestFunction::zero(base.spec().m())))?;
        let ecfg = lift(cfg.evolution())?;
        let grid = lift(cfg.resolved_grid(&ctx, &ecfg))?;
        *needed = grid.len();
        if len < grid.len() || re.is_null() || im.is_null() {
            return Err(invalid("output buffers too small; see `needed`"));
        }
        let rho0 = lift(cfg.initial_state())?;
        let cf = lift(joint_charfunc(&ctx, &grid, &rho0, &ecfg))?;
        for (i, z) in cf.values.iter().enumerate() {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
        Ok(())
    })
}

/// Count probabilities `p(0..=n_max)` from `n` samples of a counting
/// characteristic function on the grid `2 pi j / n`.
///
/// # Safety
/// `re`, `im` must hold `n` doubles; `probs` must hold `n_max + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_counts_from_charfunc(
    re: *const f64,
    im: *const f64,
    n: usize,
    n_max: usize,
    probs: *mut f64,
) -> CmStatus {
    if re.is_null() || im.is_null() || probs.is_null() {
        return invalid("null pointer argument");
    }
    let re = std::slice::from_raw_parts(re, n);
    let im = std::slice::from_raw_parts(im, n);
    guard(|| {
        let phi: Vec<Complex64> = re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let dist = lift(invert_counting(&phi, n_max))?;
        ptr::copy_nonoverlapping(dist.probabilities.as_ptr(), probs, dist.probabilities.len());
        Ok(())
    })
}
