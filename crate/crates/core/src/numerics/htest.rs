//! Two-sided hypothesis tests: Welch t, coefficient t, chi-square goodness of fit.

use super::ols::LinearFit;
use super::special::{chi_square_sf, student_t_two_sided};
use crate::error::{Error, Result};
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;

/// Levels reported in serialized `reject_at` maps.
pub const REPORT_LEVELS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    /// Both samples had zero variance; statistic is 0 (equal means) or ±∞.
    pub degenerate: bool,
}

impl TestResult {
    pub fn reject_at(&self, level: f64) -> bool {
        self.p_value < level
    }
}

impl Serialize for TestResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            statistic: Option<f64>,
            degrees_of_freedom: Option<f64>,
            p_value: f64,
            degenerate: bool,
            reject_at: BTreeMap<String, bool>,
        }
        let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
        Repr {
            statistic: finite(self.statistic),
            degrees_of_freedom: finite(self.degrees_of_freedom),
            p_value: self.p_value,
            degenerate: self.degenerate,
            reject_at: REPORT_LEVELS.iter().map(|l| (format!("{l}"), self.reject_at(*l))).collect(),
        }
        .serialize(s)
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch two-sample t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::arg("numerics", "welch test needs at least two observations per sample"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let diff = ma - mb;
        let (statistic, p_value) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TestResult { statistic, degrees_of_freedom: na + nb - 2.0, p_value, degenerate: true });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TestResult { statistic: t, degrees_of_freedom: df, p_value: student_t_two_sided(t, df), degenerate: false })
}

/// t-test of H0: coefficient[index] = 0 using the fit's ordinary standard errors.
pub fn coefficient_t_test(fit: &LinearFit, index: usize) -> Result<TestResult> {
    let se = fit
        .coefficient_standard_errors
        .as_ref()
        .ok_or_else(|| Error::arg("numerics", "fit carries no standard errors"))?;
    let (b, s) = match (fit.coefficients.get(index), se.get(index)) {
        (Some(b), Some(s)) => (*b, *s),
        _ => return Err(Error::arg("numerics", format!("coefficient index {index} out of range"))),
    };
    let df = fit.df_residual;
    if !(df > 0.0) || !s.is_finite() {
        return Err(Error::arg("numerics", "no residual degrees of freedom"));
    }
    if s == 0.0 {
        let (statistic, p_value) = if b == 0.0 { (0.0, 1.0) } else { (b.signum() * f64::INFINITY, 0.0) };
        return Ok(TestResult { statistic, degrees_of_freedom: df, p_value, degenerate: true });
    }
    let t = b / s;
    Ok(TestResult { statistic: t, degrees_of_freedom: df, p_value: student_t_two_sided(t, df), degenerate: false })
}

/// Pearson chi-square goodness of fit with k − 1 degrees of freedom.
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> Result<TestResult> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::arg("numerics", "chi-square needs matching observed/expected of length >= 2"));
    }
    if expected.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::arg("numerics", "expected counts must be positive"));
    }
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (observed.len() - 1) as f64;
    Ok(TestResult { statistic: stat, degrees_of_freedom: df, p_value: chi_square_sf(stat, df), degenerate: false })
}
