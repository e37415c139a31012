//! C ABI over `longsurr`.
//!
//! Panels and trajectories cross the boundary as opaque handles that the caller
//! frees with the matching `*_free`. Every fallible call returns an [`LsStatus`];
//! on failure [`ls_last_error`] describes the cause. Estimator and synthetic
//! design options are passed as JSON, with the same fields as the TOML config.

#![allow(clippy::missing_safety_doc)]

use longsurr::estimators::{EffectTrajectory, EstimatorSpec};
use longsurr::inference::{permutation_test_at, subsample_bootstrap};
use longsurr::panel::{load_panel, save_panel, srm_counts, ColumnSpec, ExperimentWindow, PanelDataset};
use longsurr::synthgen::{generate, SynthSpec};
use longsurr::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Estimation = 5,
    Inference = 6,
    Diagnostic = 7,
    Io = 8,
    Panic = 99,
}

/// Opaque panel handle.
pub struct LsPanel(PanelDataset);

/// Opaque effect trajectory handle.
pub struct LsTrajectory(EffectTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LsStatus {
    match e {
        Error::Config(_) => LsStatus::Config,
        Error::Argument { .. } => LsStatus::InvalidArgument,
        Error::Schema(_) | Error::Data(_) | Error::DesignViolation(_) => LsStatus::Data,
        Error::Singular { .. } | Error::Convergence { .. } | Error::Estimation(_) | Error::ZeroSupport { .. } => {
            LsStatus::Estimation
        }
        Error::Inference(_) => LsStatus::Inference,
        Error::Diagnostic(_) => LsStatus::Diagnostic,
        Error::Io(_) => LsStatus::Io,
    }
}

struct Fail(LsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(LsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn panel_arg<'a>(p: *const LsPanel) -> Result<&'a PanelDataset, Fail> {
    p.as_ref().map(|h| &h.0).ok_or_else(|| null("panel"))
}

unsafe fn estimator_arg(p: *const c_char) -> Result<EstimatorSpec, Fail> {
    let text = str_arg(p, "estimator_json")?;
    serde_json::from_str(text).map_err(|e| Fail(LsStatus::Config, format!("estimator_json: {e}")))
}

/// Description of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a synthetic panel from a JSON design, e.g.
/// `{"kind":"stabilized1","n_per_arm":1000,"seed":7}`. When `out_truth` is
/// non-NULL it receives the true effect trajectory.
#[no_mangle]
pub unsafe extern "C" fn ls_simulate(
    spec_json: *const c_char,
    out_panel: *mut *mut LsPanel,
    out_truth: *mut *mut LsTrajectory,
) -> LsStatus {
    guard(|| {
        if out_panel.is_null() {
            return Err(null("out_panel"));
        }
        let text = str_arg(spec_json, "spec_json")?;
        let spec: SynthSpec =
            serde_json::from_str(text).map_err(|e| Fail(LsStatus::Config, format!("spec_json: {e}")))?;
        let (ds, oracle) = generate(&spec)?;
        if !out_truth.is_null() {
            let tr = EffectTrajectory::from_parts("truth", format!("{:?}", oracle.method), vec![], &oracle.tau);
            *out_truth = Box::into_raw(Box::new(LsTrajectory(tr)));
        }
        *out_panel = Box::into_raw(Box::new(LsPanel(ds)));
        Ok(())
    })
}

/// Reads a long-format panel CSV.
#[no_mangle]
pub unsafe extern "C" fn ls_panel_load_csv(
    path: *const c_char,
    t_experimental: usize,
    t_total: usize,
    pre_periods: usize,
    out_panel: *mut *mut LsPanel,
) -> LsStatus {
    guard(|| {
        if out_panel.is_null() {
            return Err(null("out_panel"));
        }
        let path = PathBuf::from(str_arg(path, "path")?);
        let window = ExperimentWindow::new(t_experimental, t_total)?;
        let spec = ColumnSpec { pre_periods, ..ColumnSpec::infer(window) };
        *out_panel = Box::into_raw(Box::new(LsPanel(load_panel(&path, &spec)?)));
        Ok(())
    })
}

/// Writes the panel as long-format CSV.
#[no_mangle]
pub unsafe extern "C" fn ls_panel_save_csv(panel: *const LsPanel, path: *const c_char) -> LsStatus {
    guard(|| {
        let ds = panel_arg(panel)?;
        save_panel(ds, &PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Units in the panel; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ls_panel_n_units(panel: *const LsPanel) -> usize {
    panel.as_ref().map_or(0, |h| h.0.n_units())
}

/// Horizon T; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ls_panel_t_total(panel: *const LsPanel) -> usize {
    panel.as_ref().map_or(0, |h| h.0.window().t_total())
}

/// Experimental length T_E; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ls_panel_t_experimental(panel: *const LsPanel) -> usize {
    panel.as_ref().map_or(0, |h| h.0.window().t_experimental())
}

#[no_mangle]
pub unsafe extern "C" fn ls_panel_free(panel: *mut LsPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Runs one estimator, e.g. `{"name":"lsm"}` or `{"name":"knn","k":10}`.
#[no_mangle]
pub unsafe extern "C" fn ls_estimate(
    panel: *const LsPanel,
    estimator_json: *const c_char,
    seed: u64,
    out_trajectory: *mut *mut LsTrajectory,
) -> LsStatus {
    guard(|| {
        if out_trajectory.is_null() {
            return Err(null("out_trajectory"));
        }
        let ds = panel_arg(panel)?;
        let spec = estimator_arg(estimator_json)?;
        *out_trajectory = Box::into_raw(Box::new(LsTrajectory(spec.run(ds, seed)?)));
        Ok(())
    })
}

/// Point estimate with a subsample-bootstrap percentile band attached.
#[no_mangle]
pub unsafe extern "C" fn ls_estimate_with_band(
    panel: *const LsPanel,
    estimator_json: *const c_char,
    replicas: usize,
    fraction: f64,
    level: f64,
    seed: u64,
    out_trajectory: *mut *mut LsTrajectory,
) -> LsStatus {
    guard(|| {
        if out_trajectory.is_null() {
            return Err(null("out_trajectory"));
        }
        let ds = panel_arg(panel)?;
        let spec = estimator_arg(estimator_json)?;
        let est = |d: &PanelDataset| spec.run(d, seed);
        let point = est(ds)?;
        let band = subsample_bootstrap(ds, &est, replicas, fraction, seed, level)?;
        *out_trajectory = Box::into_raw(Box::new(LsTrajectory(band.apply(point)?)));
        Ok(())
    })
}

/// Sharp-null permutation test on the estimate at `period` (1-based).
#[no_mangle]
pub unsafe extern "C" fn ls_permutation_test(
    panel: *const LsPanel,
    estimator_json: *const c_char,
    replicas: usize,
    period: usize,
    seed: u64,
    out_statistic: *mut f64,
    out_p_value: *mut f64,
) -> LsStatus {
    guard(|| {
        if out_statistic.is_null() || out_p_value.is_null() {
            return Err(null("output pointer"));
        }
        let ds = panel_arg(panel)?;
        let spec = estimator_arg(estimator_json)?;
        let est = |d: &PanelDataset| spec.run(d, seed);
        let r = permutation_test_at(ds, &est, replicas, seed, period)?;
        *out_statistic = r.observed_statistic;
        *out_p_value = r.p_value;
        Ok(())
    })
}

/// Sample-ratio chi-square test of arm counts against a treated share.
#[no_mangle]
pub unsafe extern "C" fn ls_srm_test(
    n_treated: usize,
    n_control: usize,
    expected_treated_fraction: f64,
    out_statistic: *mut f64,
    out_p_value: *mut f64,
) -> LsStatus {
    guard(|| {
        if out_statistic.is_null() || out_p_value.is_null() {
            return Err(null("output pointer"));
        }
        let r = srm_counts(n_treated, n_control, expected_treated_fraction)?;
        *out_statistic = r.test.statistic;
        *out_p_value = r.test.p_value;
        Ok(())
    })
}

/// Number of periods T; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ls_trajectory_len(trajectory: *const LsTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |h| h.0.t_total())
}

/// Copies τ̂_1..τ̂_T into `out`, which must hold at least T values.
#[no_mangle]
pub unsafe extern "C" fn ls_trajectory_values(trajectory: *const LsTrajectory, out: *mut f64, len: usize) -> LsStatus {
    guard(|| {
        let tr = &trajectory.as_ref().ok_or_else(|| null("trajectory"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < tr.t_total() {
            return Err(Fail(LsStatus::InvalidArgument, format!("buffer holds {len} values, need {}", tr.t_total())));
        }
        let dst = std::slice::from_raw_parts_mut(out, tr.t_total());
        for (d, p) in dst.iter_mut().zip(&tr.points) {
            *d = p.estimate;
        }
        Ok(())
    })
}

/// Copies the band into `lower` and `upper`; INVALID_ARGUMENT when the
/// trajectory carries no band.
#[no_mangle]
pub unsafe extern "C" fn ls_trajectory_band(
    trajectory: *const LsTrajectory,
    lower: *mut f64,
    upper: *mut f64,
    len: usize,
) -> LsStatus {
    guard(|| {
        let tr = &trajectory.as_ref().ok_or_else(|| null("trajectory"))?.0;
        if lower.is_null() || upper.is_null() {
            return Err(null("output buffer"));
        }
        if len < tr.t_total() {
            return Err(Fail(LsStatus::InvalidArgument, format!("buffer holds {len} values, need {}", tr.t_total())));
        }
        let lo = std::slice::from_raw_parts_mut(lower, tr.t_total());
        let hi = std::slice::from_raw_parts_mut(upper, tr.t_total());
        for (k, p) in tr.points.iter().enumerate() {
            match (p.lower, p.upper) {
                (Some(l), Some(u)) => {
                    lo[k] = l;
                    hi[k] = u;
                }
                _ => return Err(Fail(LsStatus::InvalidArgument, "trajectory has no band".into())),
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ls_trajectory_free(trajectory: *mut LsTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}
