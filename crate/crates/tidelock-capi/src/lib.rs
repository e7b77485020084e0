//! C ABI for the synchronous-rotation laboratory.
//!
//! The interface follows the usual opaque-handle pattern: constructors
//! allocate a handle on the heap and write it through an `out` pointer,
//! accessors copy plain scalars or arrays out of a handle, and each handle
//! type has a matching `tl_*_free`. Every fallible call returns a
//! [`TlStatus`]; on failure a thread-local message (readable via
//! [`tl_last_error`]) carries the details. Strings returned through `out`
//! parameters are owned by the caller and released with [`tl_string_free`].
//!
//! Handles may be shared across threads only one-at-a-time; no function
//! panics across the boundary or aborts the process on bad input, with the
//! single exception that freeing a pointer that was never allocated by
//! this library is undefined behavior, as in any C allocator contract.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use tidelock::config::{load_model, RawConfig};
use tidelock::dynamics::{simulate, ModelParams, ReducedState, SimOptions, TrajectoryRecord};
use tidelock::dynamics::{IDX_CHI, IDX_R};
use tidelock::equilibrium::{
    find_equilibrium, lasalle_experiment, ConvergenceReport, Equilibrium, LasalleThresholds,
    PerturbationSpec, Verdict,
};
use tidelock::error::Error;
use tidelock::integrate::Method;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    /// The call succeeded.
    TlOk = 0,
    /// Invalid configuration, argument, or input file contents.
    TlErrConfig = 2,
    /// A verification-style check ran to completion and failed.
    TlErrVerification = 3,
    /// A numerical operation failed (solver divergence, chart exit, ...).
    TlErrNumeric = 4,
    /// A required pointer argument was null.
    TlErrNullArg = 5,
    /// A string argument was not valid UTF-8.
    TlErrUtf8 = 6,
    /// A file could not be read or written.
    TlErrIo = 7,
}

/// Verdict of the relaxation experiment.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlVerdict {
    /// Energy decayed monotonically and every convergence threshold held.
    TlVerdictPass = 0,
    /// The run completed but at least one threshold failed.
    TlVerdictFail = 1,
    /// The run halted early, so the thresholds could not be judged.
    TlVerdictInconclusive = 2,
}

/// Opaque handle to a validated model parameterization.
pub struct TlModel {
    inner: ModelParams,
}

/// Opaque handle to a solved synchronous equilibrium.
pub struct TlEquilibrium {
    inner: Equilibrium,
}

/// Opaque handle to a relaxation-experiment report.
pub struct TlReport {
    inner: ConvergenceReport,
}

/// Opaque handle to a sampled trajectory.
pub struct TlTrajectory {
    inner: TrajectoryRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn status_of(err: &Error) -> TlStatus {
    match err {
        Error::Config(_) => TlStatus::TlErrConfig,
        Error::Io(_) => TlStatus::TlErrIo,
        Error::Verification(_) | Error::OrderingViolation(_) | Error::IndefiniteHessian(_) => {
            TlStatus::TlErrVerification
        }
        _ => TlStatus::TlErrNumeric,
    }
}

fn fail(err: Error) -> TlStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null_arg(name: &str) -> TlStatus {
    set_error(&format!("required argument `{name}` is null"));
    TlStatus::TlErrNullArg
}

/// Run a closure, converting panics into `TL_ERR_NUMERIC` instead of
/// unwinding across the C boundary.
fn guarded(f: impl FnOnce() -> TlStatus) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            TlStatus::TlErrNumeric
        }
    }
}

/// # Safety
/// `ptr` must be either null or a pointer to a valid NUL-terminated string.
unsafe fn read_utf8<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, TlStatus> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("argument `{name}` is not valid UTF-8"));
        TlStatus::TlErrUtf8
    })
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> TlStatus {
    if out.is_null() {
        return null_arg("out");
    }
    *out = Box::into_raw(Box::new(value));
    TlStatus::TlOk
}

/// Version of the library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; never free it.
#[no_mangle]
pub extern "C" fn tl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned through an `out` parameter.
///
/// # Safety
/// `s` must be a string produced by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build the reference model (the documented default constants).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn tl_model_default(out: *mut *mut TlModel) -> TlStatus {
    guarded(|| match RawConfig::default().into_params() {
        Ok(inner) => write_handle(out, TlModel { inner }),
        Err(e) => fail(e),
    })
}

/// Build a model from a JSON configuration string.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tl_model_from_json(
    json: *const c_char,
    out: *mut *mut TlModel,
) -> TlStatus {
    guarded(|| {
        let text = match read_utf8(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RawConfig::from_json(text).and_then(RawConfig::into_params) {
            Ok(inner) => write_handle(out, TlModel { inner }),
            Err(e) => fail(e),
        }
    })
}

/// Build a model from a JSON configuration file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tl_model_from_file(
    path: *const c_char,
    out: *mut *mut TlModel,
) -> TlStatus {
    guarded(|| {
        let path = match read_utf8(path, "path") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_model(Some(Path::new(path)), None, None) {
            Ok(inner) => write_handle(out, TlModel { inner }),
            Err(e) => fail(e),
        }
    })
}

/// Replace the rigidity scale of the elastic energy.
///
/// # Safety
/// `model` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tl_model_set_epsilon(model: *mut TlModel, epsilon: f64) -> TlStatus {
    guarded(|| {
        let Some(model) = model.as_mut() else {
            return null_arg("model");
        };
        match model.inner.elastic.with_epsilon(epsilon) {
            Ok(elastic) => {
                model.inner.elastic = elastic;
                TlStatus::TlOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Replace the friction: isotropic with strength `eta`, or none for 0.
///
/// # Safety
/// `model` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tl_model_set_friction(model: *mut TlModel, eta: f64) -> TlStatus {
    guarded(|| {
        let Some(model) = model.as_mut() else {
            return null_arg("model");
        };
        if eta == 0.0 {
            model.inner.dissipation = None;
            return TlStatus::TlOk;
        }
        match tidelock::dynamics::DissipationSpec::isotropic(eta, model.inner.n()) {
            Ok(spec) => {
                model.inner.dissipation = Some(spec);
                TlStatus::TlOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of configuration slots (6 + number of auxiliary shape modes).
///
/// # Safety
/// `model` must be a live handle; `out` a valid scalar slot.
#[no_mangle]
pub unsafe extern "C" fn tl_model_dim(model: *const TlModel, out: *mut usize) -> TlStatus {
    let Some(model) = model.as_ref() else {
        return null_arg("model");
    };
    if out.is_null() {
        return null_arg("out");
    }
    *out = model.inner.dim();
    TlStatus::TlOk
}

/// Release a model handle.
///
/// # Safety
/// `model` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn tl_model_free(model: *mut TlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solve for the synchronous equilibrium of the model.
///
/// # Safety
/// `model` must be a live handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tl_find_equilibrium(
    model: *const TlModel,
    out: *mut *mut TlEquilibrium,
) -> TlStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return null_arg("model");
        };
        match find_equilibrium(&model.inner) {
            Ok(inner) => write_handle(out, TlEquilibrium { inner }),
            Err(e) => fail(e),
        }
    })
}

/// Orbital radius of the equilibrium.
///
/// # Safety
/// `eq` must be a live handle; `out` a valid scalar slot.
#[no_mangle]
pub unsafe extern "C" fn tl_equilibrium_radius(
    eq: *const TlEquilibrium,
    out: *mut f64,
) -> TlStatus {
    let Some(eq) = eq.as_ref() else {
        return null_arg("eq");
    };
    if out.is_null() {
        return null_arg("out");
    }
    *out = eq.inner.r_bar;
    TlStatus::TlOk
}

/// Copy the three moment increments into `out[0..3]`.
///
/// # Safety
/// `eq` must be a live handle; `out` must point at three writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_equilibrium_moments(
    eq: *const TlEquilibrium,
    out: *mut f64,
) -> TlStatus {
    let Some(eq) = eq.as_ref() else {
        return null_arg("eq");
    };
    if out.is_null() {
        return null_arg("out");
    }
    for (k, j) in eq.inner.j_bar.iter().enumerate() {
        *out.add(k) = *j;
    }
    TlStatus::TlOk
}

/// Angular velocity of the synchronous circular motion.
///
/// # Safety
/// `model` and `eq` must be live handles; `out` a valid scalar slot.
#[no_mangle]
pub unsafe extern "C" fn tl_equilibrium_mean_motion(
    model: *const TlModel,
    eq: *const TlEquilibrium,
    out: *mut f64,
) -> TlStatus {
    let Some(model) = model.as_ref() else {
        return null_arg("model");
    };
    let Some(eq) = eq.as_ref() else {
        return null_arg("eq");
    };
    if out.is_null() {
        return null_arg("out");
    }
    *out = eq.inner.mean_motion(&model.inner.gravity);
    TlStatus::TlOk
}

/// Serialize the equilibrium to a JSON string (release with
/// [`tl_string_free`]).
///
/// # Safety
/// `model` and `eq` must be live handles; `out` a valid string slot.
#[no_mangle]
pub unsafe extern "C" fn tl_equilibrium_json(
    model: *const TlModel,
    eq: *const TlEquilibrium,
    out: *mut *mut c_char,
) -> TlStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return null_arg("model");
        };
        let Some(eq) = eq.as_ref() else {
            return null_arg("eq");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let doc = serde_json::json!({
            "epsilon": eq.inner.epsilon,
            "p": eq.inner.p,
            "r_bar": eq.inner.r_bar,
            "j_bar": eq.inner.j_bar,
            "z_bar": eq.inner.z_bar.iter().copied().collect::<Vec<f64>>(),
            "mean_motion": eq.inner.mean_motion(&model.inner.gravity),
            "residual_norm": eq.inner.residual_norm,
            "transversal_hessian_eigs": eq.inner.transversal_hessian_eigs,
        });
        let text = match serde_json::to_string_pretty(&doc) {
            Ok(t) => t,
            Err(e) => {
                set_error(&format!("serialization failed: {e}"));
                return TlStatus::TlErrNumeric;
            }
        };
        match CString::new(text) {
            Ok(owned) => {
                *out = owned.into_raw();
                TlStatus::TlOk
            }
            Err(_) => {
                set_error("serialized JSON contained a NUL byte");
                TlStatus::TlErrNumeric
            }
        }
    })
}

/// Release an equilibrium handle.
///
/// # Safety
/// `eq` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn tl_equilibrium_free(eq: *mut TlEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

fn perturbed_state(eq: &Equilibrium, size: f64) -> Result<ReducedState, Error> {
    if !(size >= 0.0) || !size.is_finite() {
        return Err(Error::Config(format!(
            "perturbation size must be finite and nonnegative, got {size}"
        )));
    }
    let pert = PerturbationSpec::uniform(size);
    let mut y = eq.configuration();
    let mut v = y.clone();
    v.fill(0.0);
    y[IDX_R] += pert.delta_r;
    y[IDX_CHI] += pert.delta_gamma;
    v[IDX_R] += pert.delta_r_dot;
    v[IDX_CHI] += pert.delta_chi_dot;
    ReducedState::new(0.0, y, v, 0.0)
}

unsafe fn run_simulation(
    model: *const TlModel,
    eq: *const TlEquilibrium,
    perturbation: f64,
    method: Method,
    t_end: f64,
    record_interval: f64,
    out: *mut *mut TlTrajectory,
) -> TlStatus {
    let Some(model) = model.as_ref() else {
        return null_arg("model");
    };
    let Some(eq) = eq.as_ref() else {
        return null_arg("eq");
    };
    let initial = match perturbed_state(&eq.inner, perturbation) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let mut opts = SimOptions::new(method, t_end);
    opts.record_interval = record_interval;
    opts.reference = Some(eq.inner.reference_orbit(&model.inner.gravity));
    match simulate(&model.inner, &initial, &opts) {
        Ok(inner) => write_handle(out, TlTrajectory { inner }),
        Err(e) => fail(e),
    }
}

/// Integrate a perturbed equilibrium with the adaptive embedded
/// Runge-Kutta method and record the trajectory. A nonpositive
/// `record_interval` records every accepted step.
///
/// # Safety
/// `model` and `eq` must be live handles; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tl_simulate_adaptive(
    model: *const TlModel,
    eq: *const TlEquilibrium,
    perturbation: f64,
    t_end: f64,
    record_interval: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut TlTrajectory,
) -> TlStatus {
    guarded(|| {
        run_simulation(
            model,
            eq,
            perturbation,
            Method::DormandPrince { rtol, atol },
            t_end,
            record_interval,
            out,
        )
    })
}

/// Integrate a perturbed equilibrium with the fixed-step symplectic
/// midpoint method and record the trajectory.
///
/// # Safety
/// `model` and `eq` must be live handles; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tl_simulate_midpoint(
    model: *const TlModel,
    eq: *const TlEquilibrium,
    perturbation: f64,
    t_end: f64,
    record_interval: f64,
    dt: f64,
    out: *mut *mut TlTrajectory,
) -> TlStatus {
    guarded(|| {
        run_simulation(
            model,
            eq,
            perturbation,
            Method::ImplicitMidpoint { dt },
            t_end,
            record_interval,
            out,
        )
    })
}

/// Number of recorded samples.
///
/// # Safety
/// `traj` must be a live handle; `out` a valid scalar slot.
#[no_mangle]
pub unsafe extern "C" fn tl_trajectory_len(
    traj: *const TlTrajectory,
    out: *mut usize,
) -> TlStatus {
    let Some(traj) = traj.as_ref() else {
        return null_arg("traj");
    };
    if out.is_null() {
        return null_arg("out");
    }
    *out = traj.inner.len();
    TlStatus::TlOk
}

unsafe fn copy_column(column: &[f64], buf: *mut f64, cap: usize) -> TlStatus {
    if buf.is_null() {
        return null_arg("buf");
    }
    if cap < column.len() {
        set_error(&format!(
            "buffer holds {cap} samples but the trajectory has {}",
            column.len()
        ));
        return TlStatus::TlErrConfig;
    }
    std::ptr::copy_nonoverlapping(column.as_ptr(), buf, column.len());
    TlStatus::TlOk
}

/// Copy the sample times into `buf` (capacity `cap` samples).
///
/// # Safety
/// `traj` must be a live handle; `buf` must hold `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_trajectory_times(
    traj: *const TlTrajectory,
    buf: *mut f64,
    cap: usize,
) -> TlStatus {
    let Some(traj) = traj.as_ref() else {
        return null_arg("traj");
    };
    copy_column(&traj.inner.times, buf, cap)
}

/// Copy the reduced energy samples into `buf` (capacity `cap` samples).
///
/// # Safety
/// `traj` must be a live handle; `buf` must hold `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_trajectory_energies(
    traj: *const TlTrajectory,
    buf: *mut f64,
    cap: usize,
) -> TlStatus {
    let Some(traj) = traj.as_ref() else {
        return null_arg("traj");
    };
    copy_column(&traj.inner.energies, buf, cap)
}

/// Copy the manifold-distance samples into `buf` (capacity `cap` samples).
///
/// # Safety
/// `traj` must be a live handle; `buf` must hold `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_trajectory_manifold_distances(
    traj: *const TlTrajectory,
    buf: *mut f64,
    cap: usize,
) -> TlStatus {
    let Some(traj) = traj.as_ref() else {
        return null_arg("traj");
    };
    copy_column(&traj.inner.manifold_distances, buf, cap)
}

/// Write the trajectory as CSV to `path` (same layout as the CLI).
///
/// # Safety
/// `traj` must be a live handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tl_trajectory_write_csv(
    traj: *const TlTrajectory,
    path: *const c_char,
) -> TlStatus {
    guarded(|| {
        let Some(traj) = traj.as_ref() else {
            return null_arg("traj");
        };
        let path = match read_utf8(path, "path") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let mut file = match std::fs::File::create(path) {
            Ok(f) => f,
            Err(e) => return fail(Error::Io(e)),
        };
        match traj.inner.write_csv(&mut file) {
            Ok(()) => TlStatus::TlOk,
            Err(e) => fail(e),
        }
    })
}

/// Release a trajectory handle.
///
/// # Safety
/// `traj` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn tl_trajectory_free(traj: *mut TlTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Relax a perturbed equilibrium under the model's friction and judge the
/// convergence against the default thresholds. The model must be
/// dissipative.
///
/// # Safety
/// `model` and `eq` must be live handles; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tl_relax(
    model: *const TlModel,
    eq: *const TlEquilibrium,
    perturbation: f64,
    t_end: f64,
    out: *mut *mut TlReport,
) -> TlStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return null_arg("model");
        };
        let Some(eq) = eq.as_ref() else {
            return null_arg("eq");
        };
        if model.inner.dissipation.is_none() {
            return fail(Error::Config(
                "relaxation requires a dissipative model (set a friction)".into(),
            ));
        }
        if !(perturbation >= 0.0) || !perturbation.is_finite() {
            return fail(Error::Config(format!(
                "perturbation size must be finite and nonnegative, got {perturbation}"
            )));
        }
        let mut opts = SimOptions::new(
            Method::DormandPrince {
                rtol: 1e-9,
                atol: 1e-12,
            },
            t_end,
        );
        opts.record_interval = 1.0;
        match lasalle_experiment(
            &model.inner,
            &eq.inner,
            &PerturbationSpec::uniform(perturbation),
            &opts,
            &LasalleThresholds::default(),
        ) {
            Ok(inner) => write_handle(out, TlReport { inner }),
            Err(e) => fail(e),
        }
    })
}

/// Verdict of a relaxation report.
///
/// # Safety
/// `report` must be a live handle; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn tl_report_verdict(
    report: *const TlReport,
    out: *mut TlVerdict,
) -> TlStatus {
    let Some(report) = report.as_ref() else {
        return null_arg("report");
    };
    if out.is_null() {
        return null_arg("out");
    }
    *out = match report.inner.verdict {
        Verdict::Pass => TlVerdict::TlVerdictPass,
        Verdict::Fail => TlVerdict::TlVerdictFail,
        Verdict::Inconclusive => TlVerdict::TlVerdictInconclusive,
    };
    TlStatus::TlOk
}

/// Final-sample diagnostics of a relaxation report: manifold distance,
/// orientation angle, osculating eccentricity, and the largest energy
/// increase seen between consecutive samples, in that order.
///
/// # Safety
/// `report` must be a live handle; `out` must point at four writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_report_diagnostics(
    report: *const TlReport,
    out: *mut f64,
) -> TlStatus {
    let Some(report) = report.as_ref() else {
        return null_arg("report");
    };
    if out.is_null() {
        return null_arg("out");
    }
    let r = &report.inner;
    for (k, v) in [
        r.final_manifold_distance,
        r.final_gamma,
        r.final_eccentricity,
        r.max_energy_increase,
    ]
    .into_iter()
    .enumerate()
    {
        *out.add(k) = v;
    }
    TlStatus::TlOk
}

/// Release a report handle.
///
/// # Safety
/// `report` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn tl_report_free(report: *mut TlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
