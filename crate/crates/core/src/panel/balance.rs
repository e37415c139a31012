//! Randomization checks: sample-ratio mismatch and pre-treatment balance.

use super::PanelDataset;
use crate::error::{Error, Result};
use crate::numerics::{chi_square_gof, welch_t_test, TestResult};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SrmResult {
    pub n_treated: usize,
    pub n_control: usize,
    pub expected_treated_fraction: f64,
    pub test: TestResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceEntry {
    pub variable: String,
    /// `surrogate_period0` or `covariate`.
    pub kind: &'static str,
    pub test: TestResult,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct BalanceReport {
    pub srm: Option<SrmResult>,
    pub variables: Vec<BalanceEntry>,
}

/// Chi-square goodness of fit of arm counts against (f, 1 − f), one degree of freedom.
pub fn srm_counts(n_treated: usize, n_control: usize, expected_treated_fraction: f64) -> Result<SrmResult> {
    let f = expected_treated_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::arg("panel", format!("expected treated fraction {f} outside (0, 1)")));
    }
    if n_treated == 0 || n_control == 0 {
        return Err(Error::arg("panel", "both arms must be non-empty"));
    }
    let n = (n_treated + n_control) as f64;
    let test = chi_square_gof(&[n_treated as f64, n_control as f64], &[f * n, (1.0 - f) * n])?;
    Ok(SrmResult { n_treated, n_control, expected_treated_fraction: f, test })
}

pub fn srm_test(ds: &PanelDataset, expected_treated_fraction: f64) -> Result<BalanceReport> {
    let (n0, n1) = ds.arm_counts();
    Ok(BalanceReport { srm: Some(srm_counts(n1, n0, expected_treated_fraction)?), variables: vec![] })
}

/// Welch tests of treated vs control on each period-0 surrogate and each covariate.
pub fn pretreatment_balance(ds: &PanelDataset) -> Result<BalanceReport> {
    let obs = ds.observed();
    let treated = obs.arm_indices(1);
    let control = obs.arm_indices(0);
    let names = ds.column_names();
    let mut variables = Vec::new();
    for d in 0..obs.d() {
        let a: Vec<f64> = treated.iter().map(|&i| obs.s(i, 0, d)).collect();
        let b: Vec<f64> = control.iter().map(|&i| obs.s(i, 0, d)).collect();
        variables.push(BalanceEntry {
            variable: names.surrogates[d].clone(),
            kind: "surrogate_period0",
            test: welch_t_test(&a, &b)?,
        });
    }
    for r in 0..obs.r() {
        let a: Vec<f64> = treated.iter().map(|&i| obs.x(i)[r]).collect();
        let b: Vec<f64> = control.iter().map(|&i| obs.x(i)[r]).collect();
        variables.push(BalanceEntry { variable: names.covariates[r].clone(), kind: "covariate", test: welch_t_test(&a, &b)? });
    }
    Ok(BalanceReport { srm: None, variables })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::testutil::tiny;
    use crate::panel::{ColumnNames, ExperimentWindow, UnitRecord};

    #[test]
    fn srm_paper_values() {
        let r = srm_counts(667_206, 665_830, 0.5).unwrap();
        assert!((r.test.statistic - 1.420).abs() < 1e-3);
        assert!((r.test.p_value - 0.233).abs() < 1e-3);
        let r = srm_counts(1_807_335, 1_803_675, 0.5).unwrap();
        assert!((r.test.statistic - 3.710).abs() < 1e-3);
        assert!((r.test.p_value - 0.054).abs() < 1e-3);
    }

    #[test]
    fn srm_perfect_balance_and_bad_fraction() {
        let r = srm_counts(500, 500, 0.5).unwrap();
        assert_eq!(r.test.statistic, 0.0);
        assert_eq!(r.test.p_value, 1.0);
        assert!(srm_counts(5, 5, 1.0).is_err());
        assert!(srm_counts(5, 5, 0.0).is_err());
    }

    #[test]
    fn srm_depends_only_on_counts() {
        let a = tiny(10, 3, 2, 1, 0.0);
        let b = tiny(10, 3, 2, 2, 5.0);
        let ra = srm_test(&a, 0.4).unwrap().srm.unwrap();
        let rb = srm_test(&b, 0.4).unwrap().srm.unwrap();
        assert_eq!(ra.test.statistic.to_bits(), rb.test.statistic.to_bits());
    }

    fn two_group_panel(means: (f64, f64), n: usize, constant: bool) -> PanelDataset {
        let mut rng = crate::numerics::RandomStream::new(99);
        let units = (0..2 * n)
            .map(|i| {
                let arm = (i % 2) as u8;
                let m = if arm == 1 { means.1 } else { means.0 };
                let s0 = if constant { 1.0 } else { m + rng.normal() };
                UnitRecord::new(i.to_string(), arm, vec![], vec![s0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0])
            })
            .collect();
        PanelDataset::new(ExperimentWindow::new(2, 3).unwrap(), 1, 0, ColumnNames::standard(1, 0), units).unwrap()
    }

    #[test]
    fn gross_imbalance_detected() {
        let ds = two_group_panel((0.0, 10.0), 100, false);
        let rep = pretreatment_balance(&ds).unwrap();
        assert!(rep.variables[0].test.p_value < 1e-6);
    }

    #[test]
    fn constant_variable_flagged_degenerate() {
        let ds = two_group_panel((0.0, 0.0), 10, true);
        let rep = pretreatment_balance(&ds).unwrap();
        assert!(rep.variables[0].test.degenerate);
    }
}
