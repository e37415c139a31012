use super::*;
use crate::estimators::{estimate_ceb, Provenance, TrajectoryPoint};
use crate::panel::{ColumnNames, ExperimentWindow, UnitRecord};

/// T=4, T_E=2, one surrogate; iid N(0, sd²) noise plus `effect` on treated outcomes.
fn noise_panel(n_per_arm: usize, effect: f64, sd: f64, seed: u64) -> PanelDataset {
    let mut rng = RandomStream::new(seed);
    let units = (0..2 * n_per_arm)
        .map(|i| {
            let arm = (i % 2) as u8;
            let s: Vec<f64> = (0..5).map(|_| sd * rng.normal()).collect();
            let y: Vec<f64> = (0..4).map(|_| sd * rng.normal() + effect * arm as f64).collect();
            UnitRecord::new(format!("u{i}"), arm, vec![], s, y)
        })
        .collect();
    PanelDataset::new(ExperimentWindow::new(2, 4).unwrap(), 1, 0, ColumnNames::standard(1, 0), units).unwrap()
}

fn ceb(ds: &PanelDataset) -> Result<EffectTrajectory> {
    estimate_ceb(ds)
}

fn constant(c: f64) -> EffectTrajectory {
    let obs = vec![TrajectoryPoint::new(1, c, Provenance::Observed), TrajectoryPoint::new(2, c, Provenance::Observed)];
    EffectTrajectory::from_parts("const", String::new(), obs, &[c, c])
}

#[test]
fn single_replicate_p_is_zero_or_one() {
    let ds = noise_panel(20, 0.0, 1.0, 1);
    for seed in 0..5 {
        let r = permutation_test(&ds, &ceb, 1, seed).unwrap();
        assert!(r.p_value == 0.0 || r.p_value == 1.0);
    }
}

#[test]
fn strong_effect_is_never_exceeded() {
    let ds = noise_panel(50, 5.0, 1.0, 2);
    let r = permutation_test(&ds, &ceb, 500, 3).unwrap();
    assert!(r.p_value <= 1.0 / 500.0);
    assert_eq!(r.replicate_statistics.len(), 500);
}

#[test]
fn negated_statistic_gives_same_p() {
    let ds = noise_panel(30, 0.2, 1.0, 4);
    let neg = |d: &PanelDataset| estimate_ceb(d).map(|t| t.negated());
    let a = permutation_test(&ds, &ceb, 200, 9).unwrap();
    let b = permutation_test(&ds, &neg, 200, 9).unwrap();
    assert_eq!(a.p_value, b.p_value);
}

#[test]
fn replicates_do_not_depend_on_thread_count() {
    let ds = noise_panel(30, 0.0, 1.0, 5);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| permutation_test(&ds, &ceb, 64, 7).unwrap());
    let b = four.install(|| permutation_test(&ds, &ceb, 64, 7).unwrap());
    assert_eq!(a.replicate_statistics, b.replicate_statistics);
    let a = one.install(|| subsample_bootstrap(&ds, &ceb, 32, 0.5, 7, 0.95).unwrap());
    let b = four.install(|| subsample_bootstrap(&ds, &ceb, 32, 0.5, 7, 0.95).unwrap());
    assert_eq!(a.lower, b.lower);
    assert_eq!(a.upper, b.upper);
}

#[test]
fn permutation_preserves_arm_counts() {
    let ds = noise_panel(7, 0.0, 1.0, 6);
    let check = |d: &PanelDataset| {
        assert_eq!(d.arm_counts(), (7, 7));
        estimate_ceb(d)
    };
    permutation_test(&ds, &check, 20, 0).unwrap();
}

#[test]
fn failures_are_counted_then_fatal() {
    let ds = noise_panel(20, 0.0, 1.0, 8);
    let first_five_treated = |d: &PanelDataset| d.units()[..5].iter().all(|u| u.arm == 1);
    let rare = |d: &PanelDataset| {
        if first_five_treated(d) {
            Err(Error::Estimation("synthetic failure".into()))
        } else {
            estimate_ceb(d)
        }
    };
    let r = permutation_test(&ds, &rare, 400, 1).unwrap();
    assert_eq!(r.replicate_statistics.len() + r.failures, 400);
    assert!(r.failures > 0);
    let frequent = |d: &PanelDataset| {
        if d.units()[0].arm == 1 && d.units()[1].arm == 0 {
            Err(Error::Estimation("synthetic failure".into()))
        } else {
            estimate_ceb(d)
        }
    };
    // the original labels alternate 0,1 so the point estimate itself succeeds
    assert!(matches!(permutation_test(&ds, &frequent, 200, 1), Err(Error::Inference(_))));
}

#[test]
fn identical_units_have_zero_variance() {
    let units = (0..40)
        .map(|i| UnitRecord::new(format!("u{i}"), (i % 2) as u8, vec![], vec![1.0; 5], vec![2.0; 4]))
        .collect();
    let ds = PanelDataset::new(ExperimentWindow::new(2, 4).unwrap(), 1, 0, ColumnNames::standard(1, 0), units).unwrap();
    let band = randomization_bootstrap(&ds, &ceb, 50, 0, 0.95).unwrap();
    assert!(band.variance.iter().all(|&v| v <= 1e-8));
}

#[test]
fn equal_replicates_give_point_band() {
    let ds = noise_panel(10, 0.0, 1.0, 9);
    let c = |_: &PanelDataset| Ok(constant(0.7));
    let band = randomization_bootstrap(&ds, &c, 20, 0, 0.95).unwrap();
    assert!(band.variance.iter().all(|&v| v == 0.0));
    assert!(band.lower.iter().chain(&band.upper).all(|&v| v == 0.7));
    let band = subsample_bootstrap(&ds, &c, 20, 0.5, 0, 0.95).unwrap();
    assert!(band.lower.iter().chain(&band.upper).all(|&v| v == 0.7));
}

#[test]
fn randomization_band_shrinks_with_root_n() {
    let width = |n: usize| {
        let ds = noise_panel(n, 0.0, 1.0, 10);
        let b = randomization_bootstrap(&ds, &ceb, 300, 11, 0.95).unwrap();
        b.upper[3] - b.lower[3]
    };
    let ratio = width(1000) / width(10_000);
    assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.25, "{ratio}");
}

#[test]
fn one_unit_per_arm_gives_degenerate_band() {
    let ds = noise_panel(1, 0.3, 1.0, 12);
    let point = estimate_ceb(&ds).unwrap();
    let band = subsample_bootstrap(&ds, &ceb, 30, 1.0, 0, 0.95).unwrap();
    for p in 1..=4 {
        assert_eq!(band.lower[p - 1], point.at(p));
        assert_eq!(band.upper[p - 1], point.at(p));
    }
}

#[test]
fn percentile_band_is_ordered() {
    let ds = noise_panel(40, 0.5, 1.0, 13);
    let band = subsample_bootstrap(&ds, &ceb, 100, 0.5, 2, 0.9).unwrap();
    assert!(band.lower.iter().zip(&band.upper).all(|(l, u)| l <= u));
    assert_eq!(band.replicate_trajectories.as_ref().unwrap().len(), 100);
}

#[test]
fn bad_arguments_rejected() {
    let ds = noise_panel(5, 0.0, 1.0, 14);
    assert!(subsample_bootstrap(&ds, &ceb, 10, 0.0, 0, 0.95).is_err());
    assert!(subsample_bootstrap(&ds, &ceb, 10, 1.5, 0, 0.95).is_err());
    assert!(randomization_bootstrap(&ds, &ceb, 10, 0, 1.0).is_err());
    assert!(permutation_test(&ds, &ceb, 0, 0).is_err());
    assert!(permutation_test_at(&ds, &ceb, 10, 0, 5).is_err());
}
