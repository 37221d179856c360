//! C ABI for `qjcal`.
//!
//! Every fallible function returns a [`QjcalStatus`]; on failure a message is
//! stored per thread and can be fetched with [`qjcal_last_error`]. Objects
//! cross the boundary only as opaque handles owned by the caller and released
//! with the matching `*_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qjcal::commands::{run_ensemble, EnsembleOutput};
use qjcal::config::RunConfig;
use qjcal::measurement::guardian_click_probability;
use qjcal::model::{me_solution, QubitBathParams, Rates};
use qjcal::trajectory::{survival_probability, Direction, PureState, TrajectoryRecord};
use qjcal::{Complex64, Error, ErrorCategory};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QjcalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Runtime = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Transition rates in units of `ω_Q/Q`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QjcalRates {
    pub gamma_down: f64,
    pub gamma_up: f64,
    pub gamma_sigma: f64,
    pub delta_gamma: f64,
}

/// Density-matrix elements `ρ_gg` and `ρ_ge`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QjcalDensity {
    pub rho_gg: f64,
    pub rho_ge_re: f64,
    pub rho_ge_im: f64,
}

/// Quantum jump: `direction` is `+1` for `|e⟩→|g⟩`, `-1` for `|g⟩→|e⟩`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QjcalEvent {
    pub time: f64,
    pub direction: i32,
}

/// Opaque run configuration.
pub struct QjcalConfig(RunConfig);

/// Opaque trajectory record.
pub struct QjcalTrajectory(TrajectoryRecord);

/// Opaque ensemble result.
pub struct QjcalEnsemble(EnsembleOutput);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(error: &Error) -> QjcalStatus {
    match error.category() {
        ErrorCategory::Validation => QjcalStatus::InvalidParameter,
        ErrorCategory::Runtime => QjcalStatus::Runtime,
        ErrorCategory::Io => QjcalStatus::Io,
    }
}

/// Runs `body`, converting errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), QjcalStatus>>(body: F) -> QjcalStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => QjcalStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            QjcalStatus::Panic
        }
    }
}

fn check<T>(result: qjcal::Result<T>) -> Result<T, QjcalStatus> {
    result.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, QjcalStatus> {
    // SAFETY: callers pass either null or a pointer valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| {
        set_error("null pointer argument");
        QjcalStatus::NullPointer
    })
}

fn in_ref<'a, T>(p: *const T) -> Result<&'a T, QjcalStatus> {
    // SAFETY: callers pass either null or a pointer to a live object.
    unsafe { p.as_ref() }.ok_or_else(|| {
        set_error("null pointer argument");
        QjcalStatus::NullPointer
    })
}

fn qubit(beta_hw: f64) -> QubitBathParams {
    QubitBathParams {
        beta_hw,
        ..QubitBathParams::default()
    }
}

fn from_rates(r: &Rates) -> QjcalRates {
    QjcalRates {
        gamma_down: r.gamma_down,
        gamma_up: r.gamma_up,
        gamma_sigma: r.gamma_sigma,
        delta_gamma: r.delta_gamma,
    }
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qjcal_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Rates for `βħω_Q` (pass `INFINITY` for zero temperature).
#[no_mangle]
pub unsafe extern "C" fn qjcal_rates(beta_hw: f64, out: *mut QjcalRates) -> QjcalStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = from_rates(&check(Rates::from_beta_hw(beta_hw))?);
        Ok(())
    })
}

/// Master-equation solution at time `t` (units of `1/Γ↓(T=0)`).
#[no_mangle]
pub unsafe extern "C" fn qjcal_me_solution(
    beta_hw: f64,
    rho0: QjcalDensity,
    t: f64,
    out: *mut QjcalDensity,
) -> QjcalStatus {
    guard(|| {
        let out = out_ref(out)?;
        let rho = check(me_solution(
            &qubit(beta_hw),
            rho0.rho_gg,
            Complex64::new(rho0.rho_ge_re, rho0.rho_ge_im),
            t,
        ))?;
        *out = QjcalDensity {
            rho_gg: rho.rho_gg,
            rho_ge_re: rho.rho_ge.re,
            rho_ge_im: rho.rho_ge.im,
        };
        Ok(())
    })
}

fn state(prob_e: f64, phase: f64) -> Result<PureState, QjcalStatus> {
    check(PureState::from_excited_population(prob_e, phase))
}

/// No-jump probability up to `t` from the state with excited population
/// `prob_e` and relative phase `phase`.
#[no_mangle]
pub unsafe extern "C" fn qjcal_survival_probability(
    beta_hw: f64,
    prob_e: f64,
    phase: f64,
    t: f64,
    out: *mut f64,
) -> QjcalStatus {
    guard(|| {
        let out = out_ref(out)?;
        let rates = check(Rates::from_beta_hw(beta_hw))?;
        if t.is_nan() || t < 0.0 {
            set_error(format!("invalid parameter `t`: must be >= 0, got {t}"));
            return Err(QjcalStatus::InvalidParameter);
        }
        *out = survival_probability(&state(prob_e, phase)?, &rates, t);
        Ok(())
    })
}

/// Probability that the first photon is absorbed by the detector, by
/// quadrature.
#[no_mangle]
pub unsafe extern "C" fn qjcal_guardian_click_probability(
    beta_hw: f64,
    prob_e: f64,
    out: *mut f64,
) -> QjcalStatus {
    guard(|| {
        let out = out_ref(out)?;
        let rates = check(Rates::from_beta_hw(beta_hw))?;
        *out = check(guardian_click_probability(&state(prob_e, 0.0)?, &rates))?.quadrature;
        Ok(())
    })
}

/// New configuration with default values.
#[no_mangle]
pub extern "C" fn qjcal_config_default() -> *mut QjcalConfig {
    Box::into_raw(Box::new(QjcalConfig(RunConfig::default())))
}

/// Parses a JSON configuration. On success `*out` receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn qjcal_config_from_json(
    json: *const c_char,
    out: *mut *mut QjcalConfig,
) -> QjcalStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        if json.is_null() {
            set_error("null pointer argument");
            return Err(QjcalStatus::NullPointer);
        }
        // SAFETY: checked non-null; the caller guarantees NUL termination.
        let text = unsafe { CStr::from_ptr(json) }.to_str().map_err(|_| {
            set_error("configuration is not valid UTF-8");
            QjcalStatus::InvalidParameter
        })?;
        let cfg = check(RunConfig::from_json(text))?;
        check(cfg.validate())?;
        *out = Box::into_raw(Box::new(QjcalConfig(cfg)));
        Ok(())
    })
}

/// Serializes the fully resolved configuration into `buf`. `*len` receives
/// the required size including the terminating NUL; if `buf_len` is too
/// small nothing is written and `BufferTooSmall` is returned.
#[no_mangle]
pub unsafe extern "C" fn qjcal_config_to_json(
    cfg: *const QjcalConfig,
    buf: *mut c_char,
    buf_len: usize,
    len: *mut usize,
) -> QjcalStatus {
    guard(|| {
        let cfg = in_ref(cfg)?;
        let len = out_ref(len)?;
        let resolved = check(cfg.0.resolved())?;
        let text = check(qjcal::output::to_json_string(&resolved))?;
        *len = text.len() + 1;
        if buf.is_null() || buf_len < *len {
            set_error(format!("buffer of {buf_len} bytes is too small, need {}", *len));
            return Err(QjcalStatus::BufferTooSmall);
        }
        // SAFETY: `buf` holds at least `*len` bytes.
        unsafe {
            ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
            *buf.add(text.len()) = 0;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qjcal_config_free(cfg: *mut QjcalConfig) {
    if !cfg.is_null() {
        // SAFETY: the handle came from `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Runs trajectory `index` with the configured scheme over `[0, t_max]`.
#[no_mangle]
pub unsafe extern "C" fn qjcal_trajectory_simulate(
    cfg: *const QjcalConfig,
    index: u64,
    out: *mut *mut QjcalTrajectory,
) -> QjcalStatus {
    guard(|| {
        let cfg = &in_ref(cfg)?.0;
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let sim = check(cfg.simulator(cfg.t_max))?;
        let record = check(sim.run(cfg.seed, index))?;
        *out = Box::into_raw(Box::new(QjcalTrajectory(record)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qjcal_trajectory_event_count(
    traj: *const QjcalTrajectory,
    out: *mut usize,
) -> QjcalStatus {
    guard(|| {
        *out_ref(out)? = in_ref(traj)?.0.events.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qjcal_trajectory_event(
    traj: *const QjcalTrajectory,
    i: usize,
    out: *mut QjcalEvent,
) -> QjcalStatus {
    guard(|| {
        let traj = in_ref(traj)?;
        let out = out_ref(out)?;
        let e = traj.0.events.get(i).ok_or_else(|| {
            set_error(format!("event index {i} out of range"));
            QjcalStatus::InvalidParameter
        })?;
        *out = QjcalEvent {
            time: e.time,
            direction: match e.direction {
                Direction::Down => 1,
                Direction::Up => -1,
            },
        };
        Ok(())
    })
}

/// Excited population of the trajectory at time `t`.
#[no_mangle]
pub unsafe extern "C" fn qjcal_trajectory_prob_e(
    traj: *const QjcalTrajectory,
    t: f64,
    out: *mut f64,
) -> QjcalStatus {
    guard(|| {
        let traj = in_ref(traj)?;
        *out_ref(out)? = traj.0.state_at(t).prob_e();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qjcal_trajectory_free(traj: *mut QjcalTrajectory) {
    if !traj.is_null() {
        // SAFETY: the handle came from `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(traj) });
    }
}

/// Runs the configured ensemble on `workers` threads (0 = all cores).
#[no_mangle]
pub unsafe extern "C" fn qjcal_ensemble_run(
    cfg: *const QjcalConfig,
    workers: usize,
    out: *mut *mut QjcalEnsemble,
) -> QjcalStatus {
    guard(|| {
        let cfg = &in_ref(cfg)?.0;
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let result = check(run_ensemble(cfg, workers))?;
        *out = Box::into_raw(Box::new(QjcalEnsemble(result)));
        Ok(())
    })
}

/// Number of time bins.
#[no_mangle]
pub unsafe extern "C" fn qjcal_ensemble_bins(ens: *const QjcalEnsemble, out: *mut usize) -> QjcalStatus {
    guard(|| {
        *out_ref(out)? = in_ref(ens)?.0.stats.t.len();
        Ok(())
    })
}

/// Copies bin centers, `J_ee` and its standard error into caller arrays of
/// length `len`; any of the pointers may be null to skip that column.
#[no_mangle]
pub unsafe extern "C" fn qjcal_ensemble_series(
    ens: *const QjcalEnsemble,
    t: *mut f64,
    j_ee: *mut f64,
    se_ee: *mut f64,
    len: usize,
) -> QjcalStatus {
    guard(|| {
        let stats = &in_ref(ens)?.0.stats;
        if len < stats.t.len() {
            set_error(format!("arrays of length {len} are too short, need {}", stats.t.len()));
            return Err(QjcalStatus::BufferTooSmall);
        }
        for (dst, src) in [(t, &stats.t), (j_ee, &stats.j_ee), (se_ee, &stats.se_ee)] {
            if !dst.is_null() {
                // SAFETY: non-null destinations hold at least `len` values.
                unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
            }
        }
        Ok(())
    })
}

/// `max_t |J_ee − ρ_ee|` and the largest model z-score.
#[no_mangle]
pub unsafe extern "C" fn qjcal_ensemble_me_deviation(
    ens: *const QjcalEnsemble,
    max_abs_dev_ee: *mut f64,
    max_abs_z: *mut f64,
) -> QjcalStatus {
    guard(|| {
        let cmp = &in_ref(ens)?.0.report.comparison;
        *out_ref(max_abs_dev_ee)? = cmp.max_abs_dev_ee;
        *out_ref(max_abs_z)? = cmp.max_abs_z;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qjcal_ensemble_free(ens: *mut QjcalEnsemble) {
    if !ens.is_null() {
        // SAFETY: the handle came from `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(ens) });
    }
}
