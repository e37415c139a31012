use super::*;
use crate::estimators::{estimate_lsm, EffectTrajectory, LsmOptions};
use crate::panel::{ColumnNames, ExperimentWindow, UnitRecord};
use crate::synthgen::{generate, SynthKind, SynthSpec};

fn violation_panel(gamma: f64, n: usize, seed: u64) -> PanelDataset {
    let mut s = SynthSpec::new(SynthKind::ComparabilityViolation, n, seed);
    s.gamma = gamma;
    generate(&s).unwrap().0
}

fn lsm(ds: &PanelDataset) -> Result<EffectTrajectory> {
    estimate_lsm(ds, &LsmOptions::default())
}

#[test]
fn equal_periods_rejected() {
    let ds = violation_panel(1.0, 50, 0);
    assert!(matches!(comparability_test(&ds, 2, 2, 1, &MatchOptions::default()), Err(Error::Argument { .. })));
    assert!(parallel_trends_test(&ds, 2, 2, 1, &MatchOptions::default(), 0, 0.05).is_err());
    assert!(comparability_test(&ds, 2, 3, 3, &MatchOptions::default()).is_err());
    assert!(comparability_test(&ds, 2, 4, 1, &MatchOptions::default()).is_err());
}

#[test]
fn exchanged_copies_give_zero_statistics() {
    // periods 1 and 2 carry identical data, so Y_2|S_1 and Y_1|S_0 coincide cell by cell
    let mut rng = RandomStream::new(4);
    let units = (0..400)
        .map(|i| {
            let s0 = rng.normal();
            let y = 2.0 * s0 + rng.normal();
            let s = vec![s0, s0, rng.normal(), rng.normal()];
            UnitRecord::new(format!("u{i}"), (i % 2) as u8, vec![], s, vec![y, y, rng.normal()])
        })
        .collect();
    let ds = PanelDataset::new(ExperimentWindow::new(2, 3).unwrap(), 1, 0, ColumnNames::standard(1, 0), units).unwrap();
    let res = comparability_test(&ds, 1, 2, 1, &MatchOptions::default()).unwrap();
    for summary in &res {
        assert!(summary.n_tests > 0);
        assert!(summary.strata.iter().all(|s| s.statistic == Some(0.0) && s.p_value == 1.0));
    }
}

#[test]
fn strong_violation_detected_in_treatment_only() {
    let ds = violation_panel(3.0, 3000, 1);
    let res = comparability_test(&ds, 2, 3, 1, &MatchOptions::default()).unwrap();
    let treat = res.iter().find(|s| s.group == Group::Treatment).unwrap();
    let control = res.iter().find(|s| s.group == Group::Control).unwrap();
    assert!(treat.pct_below_05 >= 0.8, "{}", treat.pct_below_05);
    assert!(control.pct_below_05 <= 0.2, "{}", control.pct_below_05);
    assert!(treat.n_p_below_05 <= treat.n_p_below_10 && treat.n_p_below_10 <= treat.n_tests);
}

#[test]
fn comparability_ignores_unit_order() {
    let ds = violation_panel(2.0, 500, 2);
    let idx: Vec<usize> = (0..ds.n_units()).rev().collect();
    let rev = ds.resample(&idx).unwrap();
    let a = comparability_test(&ds, 2, 3, 1, &MatchOptions::default()).unwrap();
    let b = comparability_test(&rev, 2, 3, 1, &MatchOptions::default()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.n_tests, y.n_tests);
        assert_eq!(x.n_p_below_05, y.n_p_below_05);
        for (s, r) in x.strata.iter().zip(&y.strata) {
            assert!((s.p_value - r.p_value).abs() < 1e-9);
        }
    }
}

#[test]
fn no_testable_cell_is_a_diagnostic_error() {
    let units = (0..4)
        .map(|i| UnitRecord::new(format!("u{i}"), (i % 2) as u8, vec![], vec![i as f64; 5], vec![i as f64; 4]))
        .collect();
    let ds = PanelDataset::new(ExperimentWindow::new(3, 4).unwrap(), 1, 0, ColumnNames::standard(1, 0), units).unwrap();
    assert!(matches!(comparability_test(&ds, 2, 3, 1, &MatchOptions::default()), Err(Error::Diagnostic(_))));
}

#[test]
fn violation_rejects_parallel_trends_and_null_does_not() {
    let opts = MatchOptions { n_bins: 20, use_covariates: true };
    let none = parallel_trends_test(&violation_panel(1.0, 1000, 3), 2, 3, 1, &opts, 7, 0.05).unwrap();
    assert!(!none.reject, "p = {}", none.p_value);
    let strong = parallel_trends_test(&violation_panel(3.0, 1000, 3), 2, 3, 1, &opts, 7, 0.05).unwrap();
    assert!(strong.p_value < 0.01);
    assert!(strong.matched_pairs.iter().all(|&n| n > 0));
}

#[test]
fn common_shift_moves_only_beta2() {
    let ds = violation_panel(1.5, 800, 4);
    let opts = MatchOptions::default();
    let base = parallel_trends_test(&ds, 2, 3, 1, &opts, 1, 0.05).unwrap();
    let shifted = ds.map_outcomes(|_, t, y| if t == 2 { y + 0.75 } else { y }).unwrap();
    let moved = parallel_trends_test(&shifted, 2, 3, 1, &opts, 1, 0.05).unwrap();
    assert!((moved.beta[2] - base.beta[2] - 0.75).abs() < 1e-9);
    assert!((moved.beta3_hat - base.beta3_hat).abs() < 1e-9);
    assert_eq!(moved.reject, moved.p_value < 0.05);
}

#[test]
fn parallel_trends_is_seeded() {
    let ds = violation_panel(2.0, 300, 5);
    let opts = MatchOptions::default();
    let a = parallel_trends_test(&ds, 2, 3, 1, &opts, 9, 0.05).unwrap();
    let b = parallel_trends_test(&ds, 2, 3, 1, &opts, 9, 0.05).unwrap();
    assert_eq!(a.beta, b.beta);
}

#[test]
fn omitted_surrogate_curve_contains_baseline() {
    let (ds, truth) = generate(&SynthSpec { n_per_arm: 2000, ..SynthSpec::new(SynthKind::Stabilized1, 2000, 6) }).unwrap();
    let curve = sensitivity_omitted_surrogate(&ds, &lsm, &[0.0, 0.1, 3.0], &truth.tau, 1).unwrap();
    let base = compute_metrics(&lsm(&ds).unwrap(), &truth.tau, None).unwrap();
    assert_eq!(curve.points[0].bias, base.bias);
    assert_eq!(curve.points[0].rmse, base.mse.sqrt());
    assert!(curve.points[2].rmse > curve.points[0].rmse);
    assert!(sensitivity_omitted_surrogate(&ds, &lsm, &[0.5], &truth.tau, 1).is_err());
}

#[test]
fn subset_curve_starts_with_full_set() {
    let (ds, truth) = generate(&SynthSpec::new(SynthKind::Stabilized1, 2000, 7)).unwrap();
    let curve = sensitivity_surrogate_subsets(&ds, &lsm, &[vec![0, 1]], &truth.tau).unwrap();
    assert_eq!(curve.points.len(), 2);
    assert_eq!(curve.points[0].subset.as_deref(), Some(&[0, 1, 2, 3][..]));
    let base = compute_metrics(&lsm(&ds).unwrap(), &truth.tau, None).unwrap();
    assert_eq!(curve.points[0].bias, base.bias);
    // dropping the heavily weighted surrogates hurts
    assert!(curve.points[1].bias > curve.points[0].bias);
    assert!(sensitivity_surrogate_subsets(&ds, &lsm, &[vec![4]], &truth.tau).is_err());
    assert!(sensitivity_surrogate_subsets(&ds, &lsm, &[vec![]], &truth.tau).is_err());
}

#[test]
fn csv_layout() {
    let ds = violation_panel(3.0, 500, 8);
    let report = ValidationReport {
        comparability: comparability_test(&ds, 2, 3, 1, &MatchOptions::default()).unwrap(),
        ..Default::default()
    };
    let mut buf = Vec::new();
    report.write_comparability_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("group,t,t_prime,n_tests,n_p10,n_p05,pct10,pct05"));
    assert!(lines.next().unwrap().starts_with("treatment,2,3,"));
    assert!(report.to_json().unwrap().contains("\"comparability\""));
}
