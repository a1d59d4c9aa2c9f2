//! C interface to `wavespec`.
//!
//! Every function returns a [`WsStatus`]. On failure the message is kept per
//! thread and can be read with [`ws_last_error_message`]. Fits and
//! simulators are opaque handles released by their `_free` functions.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wavespec::estimation::{fit, Method, MethodKind, OptimizerConfig};
use wavespec::model::{eval_spectrum, WaveParams};
use wavespec::nonparam::select_frequencies;
use wavespec::sampling::{QuadratureOverrides, SampledModel, SamplingScheme, TimeSeries};
use wavespec::simulation::CirculantEmbedding;
use wavespec::uncertainty::estimator_variance_and_ci;
use wavespec::{Error, FitResult};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside the domain of the operation.
    Domain = 2,
    /// Inconsistent or unsupported configuration.
    Config = 3,
    /// A numerical procedure failed.
    Numerical = 4,
    Io = 5,
    Parse = 6,
    /// Caller-supplied buffer is too short.
    BufferTooSmall = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// Estimators accepted by [`ws_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsMethod {
    LeastSquares = 0,
    BartlettLeastSquares = 1,
    Whittle = 2,
    AliasedWhittle = 3,
    DebiasedWhittle = 4,
    GaussianMl = 5,
}

/// Free parameters of the spectrum with the default shape constants.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsParams {
    pub alpha: f64,
    pub omega_p: f64,
    pub gamma: f64,
    pub r: f64,
}

/// Fitted parameters and diagnostics.
pub struct WsFit {
    inner: FitResult,
}

/// Precomputed circulant embedding for repeated simulation.
pub struct WsSimulator {
    inner: CirculantEmbedding,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WsStatus {
    match e {
        Error::Domain(_) => WsStatus::Domain,
        Error::Config(_) => WsStatus::Config,
        Error::Numerical(_) => WsStatus::Numerical,
        Error::Io(_) => WsStatus::Io,
        Error::Parse(_) => WsStatus::Parse,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Short { needed: usize, got: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, recording any error or panic for the calling thread.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            WsStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            WsStatus::NullPointer
        }
        Ok(Err(Failure::Short { needed, got })) => {
            set_error(format!("buffer holds {got} values, {needed} needed"));
            WsStatus::BufferTooSmall
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            WsStatus::Panic
        }
    }
}

unsafe fn read_params(p: *const WsParams) -> Result<WaveParams, Failure> {
    let p = p.as_ref().ok_or(Failure::Null("params"))?;
    Ok(WaveParams::new(p.alpha, p.omega_p, p.gamma, p.r)?)
}

fn to_ws(theta: [f64; 4]) -> WsParams {
    WsParams {
        alpha: theta[0],
        omega_p: theta[1],
        gamma: theta[2],
        r: theta[3],
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, name: &'static str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn method_kind(m: WsMethod) -> MethodKind {
    match m {
        WsMethod::LeastSquares => MethodKind::Ls,
        WsMethod::BartlettLeastSquares => MethodKind::Bls,
        WsMethod::Whittle => MethodKind::Whittle,
        WsMethod::AliasedWhittle => MethodKind::AliasedWhittle,
        WsMethod::DebiasedWhittle => MethodKind::DebiasedWhittle,
        WsMethod::GaussianMl => MethodKind::GaussianMl,
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ws_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ws_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Canonical parameters `(0.7, 0.7, 3.3, 4)`.
#[no_mangle]
pub extern "C" fn ws_params_canonical() -> WsParams {
    to_ws(WaveParams::canonical().free())
}

/// Spectral density at `n` angular frequencies.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrum(
    params: *const WsParams,
    omegas: *const f64,
    n: usize,
    out: *mut f64,
) -> WsStatus {
    guard(|| {
        let theta = read_params(params)?;
        let w = slice(omegas, n, "omegas")?;
        let out = slice_mut(out, n, "out")?;
        for (o, &wi) in out.iter_mut().zip(w) {
            *o = eval_spectrum(wi, &theta)?;
        }
        Ok(())
    })
}

/// Expected periodogram of a record of `n` samples at spacing `delta`,
/// written in ascending frequency order (`n` values, indices
/// `-ceil(n/2)+1 ..= floor(n/2)`).
#[no_mangle]
pub unsafe extern "C" fn ws_expected_periodogram(
    params: *const WsParams,
    delta: f64,
    n: usize,
    differenced: bool,
    out: *mut f64,
    out_len: usize,
) -> WsStatus {
    guard(|| {
        let theta = read_params(params)?;
        let scheme = SamplingScheme::new(delta, n)?;
        if out_len < n {
            return Err(Failure::Short { needed: n, got: out_len });
        }
        let out = slice_mut(out, n, "out")?;
        let model = SampledModel::with_default_quadrature(theta, scheme, differenced)?;
        out.copy_from_slice(&model.expected_periodogram());
        Ok(())
    })
}

/// Builds a simulator for records of `n` samples at spacing `delta`.
#[no_mangle]
pub unsafe extern "C" fn ws_simulator_new(
    params: *const WsParams,
    delta: f64,
    n: usize,
    out: *mut *mut WsSimulator,
) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let theta = read_params(params)?;
        let scheme = SamplingScheme::new(delta, n)?;
        let quad = QuadratureOverrides::default().resolve(&theta, &scheme)?;
        let inner = CirculantEmbedding::from_model(&theta, &scheme, &quad)?;
        *out = Box::into_raw(Box::new(WsSimulator { inner }));
        Ok(())
    })
}

/// Writes record `rep` of the stream seeded by `seed` into `out`, which must
/// hold `out_len >= n` values. The same `(seed, rep)` always gives the same
/// record.
#[no_mangle]
pub unsafe extern "C" fn ws_simulator_sample(
    sim: *const WsSimulator,
    seed: u64,
    rep: u64,
    out: *mut f64,
    out_len: usize,
) -> WsStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or(Failure::Null("sim"))?;
        let x = sim.inner.sample(seed, rep);
        if out_len < x.len() {
            return Err(Failure::Short { needed: x.len(), got: out_len });
        }
        slice_mut(out, x.len(), "out")?.copy_from_slice(x.values());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ws_simulator_free(sim: *mut WsSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Fits `method` to the `n` samples at `x`, using Fourier frequencies with
/// `omega_min <= |w| <= omega_max` other than zero and Nyquist. Pass
/// `INFINITY` for an open upper end.
#[no_mangle]
pub unsafe extern "C" fn ws_fit(
    x: *const f64,
    n: usize,
    delta: f64,
    method: WsMethod,
    omega_min: f64,
    omega_max: f64,
    out: *mut *mut WsFit,
) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let series = TimeSeries::new(slice(x, n, "x")?.to_vec(), delta)?;
        let selection = select_frequencies(&series.scheme(), omega_min, omega_max, true)?;
        let inner = fit(
            &series,
            &Method::new(method_kind(method)),
            &selection,
            &QuadratureOverrides::default(),
            &OptimizerConfig::default(),
        )?;
        *out = Box::into_raw(Box::new(WsFit { inner }));
        Ok(())
    })
}

/// Estimated parameters.
#[no_mangle]
pub unsafe extern "C" fn ws_fit_params(fit: *const WsFit, out: *mut WsParams) -> WsStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or(Failure::Null("fit"))?;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = to_ws(fit.inner.theta_hat.free());
        Ok(())
    })
}

/// Objective at the optimum (maximised form) and the convergence flag.
#[no_mangle]
pub unsafe extern "C" fn ws_fit_summary(fit: *const WsFit, objective: *mut f64, converged: *mut bool) -> WsStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or(Failure::Null("fit"))?;
        *objective.as_mut().ok_or(Failure::Null("objective"))? = fit.inner.objective_at_opt;
        *converged.as_mut().ok_or(Failure::Null("converged"))? = fit.inner.converged;
        Ok(())
    })
}

/// Sandwich standard errors and confidence intervals at coverage `level`
/// for a de-biased Whittle fit. Lower ends are clipped to the parameter
/// space. Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn ws_fit_confidence_intervals(
    fit: *const WsFit,
    level: f64,
    std_error: *mut WsParams,
    lower: *mut WsParams,
    upper: *mut WsParams,
) -> WsStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or(Failure::Null("fit"))?;
        let report = estimator_variance_and_ci(&fit.inner, level)?;
        let pick = |g: fn(&wavespec::uncertainty::ConfidenceInterval) -> f64| {
            let mut v = [0.0; 4];
            for (o, ci) in v.iter_mut().zip(&report.intervals) {
                *o = g(ci);
            }
            to_ws(v)
        };
        if let Some(p) = std_error.as_mut() {
            *p = pick(|c| c.std_error);
        }
        if let Some(p) = lower.as_mut() {
            *p = pick(|c| c.lower);
        }
        if let Some(p) = upper.as_mut() {
            *p = pick(|c| c.upper);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ws_fit_free(fit: *mut WsFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
