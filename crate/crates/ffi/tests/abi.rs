use longsurr_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ls_last_error()).to_string_lossy().into_owned() }
}

fn simulate(json: &str) -> (*mut LsPanel, *mut LsTrajectory) {
    let mut panel = ptr::null_mut();
    let mut truth = ptr::null_mut();
    let status = unsafe { ls_simulate(c(json).as_ptr(), &mut panel, &mut truth) };
    assert_eq!(status, LsStatus::Ok, "{}", last_error());
    (panel, truth)
}

#[test]
fn simulate_estimate_roundtrip() {
    let (panel, truth) = simulate(r#"{"kind":"stabilized1","n_per_arm":500,"seed":3}"#);
    unsafe {
        assert_eq!(ls_panel_n_units(panel), 1000);
        assert_eq!(ls_panel_t_total(panel), 10);
        assert_eq!(ls_panel_t_experimental(panel), 3);
        let mut tr = ptr::null_mut();
        assert_eq!(ls_estimate(panel, c(r#"{"name":"lsm"}"#).as_ptr(), 1, &mut tr), LsStatus::Ok);
        assert_eq!(ls_trajectory_len(tr), 10);
        let mut est = [0.0; 10];
        let mut tau = [0.0; 10];
        assert_eq!(ls_trajectory_values(tr, est.as_mut_ptr(), 10), LsStatus::Ok);
        assert_eq!(ls_trajectory_values(truth, tau.as_mut_ptr(), 10), LsStatus::Ok);
        assert!((est[9] - tau[9]).abs() < 0.5, "{est:?} vs {tau:?}");
        assert_eq!(ls_trajectory_values(tr, est.as_mut_ptr(), 9), LsStatus::InvalidArgument);
        let (mut lo, mut hi) = ([0.0; 10], [0.0; 10]);
        assert_eq!(ls_trajectory_band(tr, lo.as_mut_ptr(), hi.as_mut_ptr(), 10), LsStatus::InvalidArgument);
        ls_trajectory_free(tr);
        ls_trajectory_free(truth);
        ls_panel_free(panel);
    }
}

#[test]
fn band_brackets_are_ordered() {
    let (panel, _) = simulate(r#"{"kind":"stabilized1","n_per_arm":300,"seed":4}"#);
    unsafe {
        let mut tr = ptr::null_mut();
        let s = ls_estimate_with_band(panel, c(r#"{"name":"lsm"}"#).as_ptr(), 30, 0.5, 0.9, 2, &mut tr);
        assert_eq!(s, LsStatus::Ok, "{}", last_error());
        let (mut lo, mut hi) = ([0.0; 10], [0.0; 10]);
        assert_eq!(ls_trajectory_band(tr, lo.as_mut_ptr(), hi.as_mut_ptr(), 10), LsStatus::Ok);
        assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h));
        ls_trajectory_free(tr);
        ls_panel_free(panel);
    }
}

#[test]
fn csv_roundtrip_and_permutation() {
    let (panel, truth) = simulate(r#"{"kind":"no_effect","n_per_arm":60,"seed":5,"t_total":4,"t_experimental":2}"#);
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("p.csv").to_str().unwrap());
    unsafe {
        assert_eq!(ls_panel_save_csv(panel, path.as_ptr()), LsStatus::Ok, "{}", last_error());
        let mut back = ptr::null_mut();
        assert_eq!(ls_panel_load_csv(path.as_ptr(), 2, 4, 0, &mut back), LsStatus::Ok, "{}", last_error());
        assert_eq!(ls_panel_n_units(back), 120);
        let (mut stat, mut p) = (0.0, 0.0);
        let est = c(r#"{"name":"lsm"}"#);
        assert_eq!(ls_permutation_test(back, est.as_ptr(), 20, 4, 9, &mut stat, &mut p), LsStatus::Ok);
        assert!((0.0..=1.0).contains(&p));
        ls_panel_free(back);
        ls_panel_free(panel);
        ls_trajectory_free(truth);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut panel = ptr::null_mut();
        assert_eq!(ls_simulate(ptr::null(), &mut panel, ptr::null_mut()), LsStatus::NullPointer);
        assert_eq!(ls_simulate(c("{not json").as_ptr(), &mut panel, ptr::null_mut()), LsStatus::Config);
        assert!(last_error().contains("spec_json"));
        let bad_window = c(r#"{"kind":"stabilized1","t_experimental":10,"t_total":10}"#);
        assert_eq!(ls_simulate(bad_window.as_ptr(), &mut panel, ptr::null_mut()), LsStatus::Config);
        assert!(panel.is_null());
        assert_eq!(
            ls_panel_load_csv(c("/nonexistent/x.csv").as_ptr(), 2, 4, 0, &mut panel),
            LsStatus::Data,
            "{}",
            last_error()
        );
        let mut tr = ptr::null_mut();
        assert_eq!(ls_estimate(ptr::null(), c(r#"{"name":"lsm"}"#).as_ptr(), 0, &mut tr), LsStatus::NullPointer);
        assert_eq!(ls_panel_n_units(ptr::null()), 0);
        ls_panel_free(ptr::null_mut());
        ls_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn srm_matches_known_counts() {
    let (mut stat, mut p) = (0.0, 0.0);
    unsafe {
        assert_eq!(ls_srm_test(667_206, 665_830, 0.5, &mut stat, &mut p), LsStatus::Ok);
        assert!((stat - 1.420).abs() < 5e-4 && (p - 0.233).abs() < 5e-4);
        assert_eq!(ls_srm_test(0, 10, 0.5, &mut stat, &mut p), LsStatus::InvalidArgument);
    }
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/longsurr.h")).unwrap();
    for name in ["ls_simulate", "ls_estimate", "ls_trajectory_values", "ls_last_error", "LS_STATUS_OK", "typedef struct LsPanel"] {
        assert!(header.contains(name), "missing {name}");
    }
    let v = unsafe { CStr::from_ptr(ls_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
