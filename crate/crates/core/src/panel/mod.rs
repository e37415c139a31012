//! Experiment panels: unit × period records with a constant arm per unit.
//!
//! Surrogates are stored for periods 0..=T and outcomes for periods 1..=T.
//! Optional observational pre-periods (all units untreated) hold surrogates for
//! −L..=−1 and outcomes for −L+1..=0.
//! Missing values are NaN; every observed-period cell (t ≤ T_E) must be present.
//! Estimators read data through [`Observed`], which refuses post-window access.

mod balance;
mod io;

pub use balance::{pretreatment_balance, srm_counts, srm_test, BalanceEntry, BalanceReport, SrmResult};
pub use io::{load_panel, save_panel, ColumnSpec};

use crate::error::{Error, Result};
use crate::estimators::trajectory::{Provenance, TrajectoryPoint};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentWindow {
    t_experimental: usize,
    t_total: usize,
}

impl ExperimentWindow {
    pub fn new(t_experimental: usize, t_total: usize) -> Result<Self> {
        if t_experimental < 2 || t_experimental >= t_total {
            return Err(Error::Config(format!(
                "window needs 2 <= T_E < T (got T_E={t_experimental}, T={t_total})"
            )));
        }
        Ok(ExperimentWindow { t_experimental, t_total })
    }

    pub fn t_experimental(&self) -> usize {
        self.t_experimental
    }

    pub fn t_total(&self) -> usize {
        self.t_total
    }

    pub fn t_future(&self) -> usize {
        self.t_total - self.t_experimental
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub unit_id: String,
    pub covariates: Vec<f64>,
    pub arm: u8,
    /// Row-major (t_total + 1) × D, period 0 first.
    pub surrogates: Vec<f64>,
    /// Periods 1..=T at index t − 1; NaN when unobserved.
    pub outcomes: Vec<f64>,
    /// Row-major L × D, periods −L..=−1 (oldest first). Empty without pre-periods.
    pub pre_surrogates: Vec<f64>,
    /// Periods −L+1..=0, oldest first. Empty without pre-periods.
    pub pre_outcomes: Vec<f64>,
}

impl UnitRecord {
    pub fn new(unit_id: String, arm: u8, covariates: Vec<f64>, surrogates: Vec<f64>, outcomes: Vec<f64>) -> Self {
        UnitRecord { unit_id, covariates, arm, surrogates, outcomes, pre_surrogates: vec![], pre_outcomes: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub outcome: String,
    pub surrogates: Vec<String>,
    pub covariates: Vec<String>,
}

impl ColumnNames {
    pub fn standard(d: usize, r: usize) -> Self {
        ColumnNames {
            outcome: "y".into(),
            surrogates: (1..=d).map(|k| format!("s{k}")).collect(),
            covariates: (1..=r).map(|k| format!("x{k}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    window: ExperimentWindow,
    units: Vec<UnitRecord>,
    d_surrogates: usize,
    r_covariates: usize,
    pre_periods: usize,
    column_names: ColumnNames,
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl PanelDataset {
    /// Validates shapes, arms, id uniqueness and completeness of the observed window.
    pub fn new(
        window: ExperimentWindow,
        d_surrogates: usize,
        r_covariates: usize,
        column_names: ColumnNames,
        units: Vec<UnitRecord>,
    ) -> Result<Self> {
        let t = window.t_total();
        let te = window.t_experimental();
        let d = d_surrogates;
        if d == 0 {
            return Err(Error::Data("at least one surrogate column is required".into()));
        }
        if column_names.surrogates.len() != d || column_names.covariates.len() != r_covariates {
            return Err(Error::Data("column names disagree with D or R".into()));
        }
        let pre = units.first().map_or(0, |u| u.pre_outcomes.len());
        let mut seen = HashSet::with_capacity(units.len());
        for u in &units {
            if u.pre_outcomes.len() != pre || u.pre_surrogates.len() != pre * d {
                return Err(Error::Data(format!("unit `{}` has inconsistent pre-period shape", u.unit_id)));
            }
            if !all_finite(&u.pre_outcomes) || !all_finite(&u.pre_surrogates) {
                return Err(Error::Data(format!("unit `{}` has a missing pre-period value", u.unit_id)));
            }
            if !seen.insert(u.unit_id.as_str()) {
                return Err(Error::Data(format!("duplicate unit id `{}`", u.unit_id)));
            }
            if u.arm > 1 {
                return Err(Error::Data(format!("unit `{}` has arm {} (expected 0/1)", u.unit_id, u.arm)));
            }
            if u.surrogates.len() != (t + 1) * d || u.outcomes.len() != t || u.covariates.len() != r_covariates {
                return Err(Error::Data(format!("unit `{}` has inconsistent shape", u.unit_id)));
            }
            if !all_finite(&u.surrogates[..(te + 1) * d]) || !all_finite(&u.outcomes[..te]) || !all_finite(&u.covariates) {
                return Err(Error::Data(format!(
                    "unit `{}` has a missing or non-finite value within periods 0..={te}",
                    u.unit_id
                )));
            }
        }
        for arm in [0u8, 1] {
            if !units.iter().any(|u| u.arm == arm) {
                return Err(Error::Data(format!("arm {arm} has no units")));
            }
        }
        Ok(PanelDataset { window, units, d_surrogates, r_covariates, pre_periods: pre, column_names })
    }

    pub fn window(&self) -> ExperimentWindow {
        self.window
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn d_surrogates(&self) -> usize {
        self.d_surrogates
    }

    pub fn r_covariates(&self) -> usize {
        self.r_covariates
    }

    pub fn column_names(&self) -> &ColumnNames {
        &self.column_names
    }

    /// Number of observational pre-periods L.
    pub fn pre_periods(&self) -> usize {
        self.pre_periods
    }

    pub fn arm_counts(&self) -> (usize, usize) {
        let n1 = self.units.iter().filter(|u| u.arm == 1).count();
        (self.units.len() - n1, n1)
    }

    /// True when any outcome after T_E is present (benchmark ground truth).
    pub fn has_future_outcomes(&self) -> bool {
        let te = self.window.t_experimental();
        self.units.iter().any(|u| u.outcomes[te..].iter().any(|v| !v.is_nan()))
    }

    /// Read-only view restricted to periods 0..=T_E.
    pub fn observed(&self) -> Observed<'_> {
        Observed { ds: self }
    }

    /// Same data with a different window (e.g. a shorter T_E for table sweeps).
    pub fn with_window(&self, window: ExperimentWindow) -> Result<Self> {
        if window.t_total() != self.window.t_total() {
            return Err(Error::Config("window must keep T".into()));
        }
        PanelDataset::new(window, self.d_surrogates, self.r_covariates, self.column_names.clone(), self.units.clone())
    }

    /// Replaces arm labels (length N).
    pub fn with_arms(&self, arms: &[u8]) -> Result<Self> {
        if arms.len() != self.units.len() {
            return Err(Error::arg("panel", "arm vector length differs from unit count"));
        }
        let units = self
            .units
            .iter()
            .zip(arms)
            .map(|(u, &a)| UnitRecord { arm: a, ..u.clone() })
            .collect();
        PanelDataset::new(self.window, self.d_surrogates, self.r_covariates, self.column_names.clone(), units)
    }

    /// Units at the given indices; duplicates receive suffixed ids.
    pub fn resample(&self, idx: &[usize]) -> Result<Self> {
        let mut counts = vec![0usize; self.units.len()];
        let units = idx
            .iter()
            .map(|&i| {
                let k = counts[i];
                counts[i] += 1;
                let mut u = self.units[i].clone();
                if k > 0 {
                    u.unit_id = format!("{}#{k}", u.unit_id);
                }
                u
            })
            .collect();
        PanelDataset::new(self.window, self.d_surrogates, self.r_covariates, self.column_names.clone(), units)
    }

    /// Arm labels flipped.
    pub fn arm_swapped(&self) -> Self {
        let mut out = self.clone();
        for u in &mut out.units {
            u.arm = 1 - u.arm;
        }
        out
    }

    /// Every observation after T_E replaced by `value`.
    pub fn with_future_replaced(&self, value: f64) -> Self {
        let te = self.window.t_experimental();
        let d = self.d_surrogates;
        let mut out = self.clone();
        for u in &mut out.units {
            u.surrogates[(te + 1) * d..].iter_mut().for_each(|v| *v = value);
            u.outcomes[te..].iter_mut().for_each(|v| *v = value);
        }
        out
    }

    /// Restricts surrogates to the listed columns (0-based, in the given order).
    pub fn select_surrogates(&self, cols: &[usize]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::arg("panel", "surrogate subset is empty"));
        }
        if let Some(c) = cols.iter().find(|&&c| c >= self.d_surrogates) {
            return Err(Error::arg("panel", format!("surrogate index {c} out of range")));
        }
        let d = self.d_surrogates;
        let t = self.window.t_total();
        let units = self
            .units
            .iter()
            .map(|u| {
                let mut s = Vec::with_capacity((t + 1) * cols.len());
                for p in 0..=t {
                    for &c in cols {
                        s.push(u.surrogates[p * d + c]);
                    }
                }
                let pre: Vec<f64> = (0..self.pre_periods)
                    .flat_map(|p| cols.iter().map(move |&c| u.pre_surrogates[p * d + c]))
                    .collect();
                UnitRecord { surrogates: s, pre_surrogates: pre, ..u.clone() }
            })
            .collect();
        let names = ColumnNames {
            surrogates: cols.iter().map(|&c| self.column_names.surrogates[c].clone()).collect(),
            ..self.column_names.clone()
        };
        PanelDataset::new(self.window, cols.len(), self.r_covariates, names, units)
    }

    /// Outcome at period t (1-based), NaN if unobserved; no window restriction.
    pub fn outcome_unchecked(&self, i: usize, t: usize) -> f64 {
        self.units[i].outcomes[t - 1]
    }

    pub fn surrogate_unchecked(&self, i: usize, t: usize, d: usize) -> f64 {
        self.units[i].surrogates[t * self.d_surrogates + d]
    }

    /// Per-unit outcome update, used by sensitivity analyses.
    pub fn map_outcomes(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Result<Self> {
        let mut out = self.clone();
        for (i, u) in out.units.iter_mut().enumerate() {
            for (k, v) in u.outcomes.iter_mut().enumerate() {
                if !v.is_nan() {
                    *v = f(i, k + 1, *v);
                }
            }
        }
        PanelDataset::new(out.window, out.d_surrogates, out.r_covariates, out.column_names, out.units)
    }
}

/// Window-restricted accessor. Periods after T_E are unreachable.
#[derive(Clone, Copy)]
pub struct Observed<'a> {
    ds: &'a PanelDataset,
}

impl<'a> Observed<'a> {
    pub fn n(&self) -> usize {
        self.ds.units.len()
    }

    pub fn t_experimental(&self) -> usize {
        self.ds.window.t_experimental()
    }

    pub fn t_total(&self) -> usize {
        self.ds.window.t_total()
    }

    pub fn d(&self) -> usize {
        self.ds.d_surrogates
    }

    pub fn r(&self) -> usize {
        self.ds.r_covariates
    }

    pub fn arm(&self, i: usize) -> u8 {
        self.ds.units[i].arm
    }

    /// Unit indices of an arm, ascending.
    pub fn arm_indices(&self, arm: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.ds.units[i].arm == arm).collect()
    }

    /// Y_{it} for 1 ≤ t ≤ T_E.
    pub fn y(&self, i: usize, t: usize) -> f64 {
        assert!(t >= 1 && t <= self.t_experimental(), "outcome period {t} outside the observed window");
        self.ds.units[i].outcomes[t - 1]
    }

    /// S_{itd} for 0 ≤ t ≤ T_E.
    pub fn s(&self, i: usize, t: usize, d: usize) -> f64 {
        assert!(t <= self.t_experimental(), "surrogate period {t} outside the observed window");
        self.ds.units[i].surrogates[t * self.ds.d_surrogates + d]
    }

    /// Surrogate vector at period t ≤ T_E.
    pub fn s_row(&self, i: usize, t: usize) -> &'a [f64] {
        assert!(t <= self.t_experimental(), "surrogate period {t} outside the observed window");
        let d = self.ds.d_surrogates;
        &self.ds.units[i].surrogates[t * d..(t + 1) * d]
    }

    pub fn x(&self, i: usize) -> &'a [f64] {
        &self.ds.units[i].covariates
    }

    pub fn pre_periods(&self) -> usize {
        self.ds.pre_periods
    }

    /// Surrogate vector at any period −L ≤ t ≤ T_E.
    pub fn s_row_at(&self, i: usize, t: i64) -> &'a [f64] {
        let d = self.ds.d_surrogates;
        if t >= 0 {
            return self.s_row(i, t as usize);
        }
        let l = self.ds.pre_periods as i64;
        assert!(t >= -l, "pre-period {t} beyond the observational depth");
        let k = (t + l) as usize;
        &self.ds.units[i].pre_surrogates[k * d..(k + 1) * d]
    }

    /// Outcome at any period −L+1 ≤ t ≤ T_E.
    pub fn y_at(&self, i: usize, t: i64) -> f64 {
        if t >= 1 {
            return self.y(i, t as usize);
        }
        let l = self.ds.pre_periods as i64;
        assert!(t > -l, "pre-period outcome {t} beyond the observational depth");
        self.ds.units[i].pre_outcomes[(t + l - 1) as usize]
    }
}

/// Difference in arm means of Y_t for t = 1..=through (through ≤ T_E).
pub fn observed_effects(ds: &PanelDataset, through: usize) -> Result<Vec<TrajectoryPoint>> {
    let obs = ds.observed();
    if through > obs.t_experimental() {
        return Err(Error::arg("panel", format!("through={through} exceeds T_E={}", obs.t_experimental())));
    }
    let treated = obs.arm_indices(1);
    let control = obs.arm_indices(0);
    Ok((1..=through)
        .map(|t| {
            let m1 = treated.iter().map(|&i| obs.y(i, t)).sum::<f64>() / treated.len() as f64;
            let m0 = control.iter().map(|&i| obs.y(i, t)).sum::<f64>() / control.len() as f64;
            TrajectoryPoint::new(t, m1 - m0, Provenance::Observed)
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Small panel: unit i has arm i % 2, S_{t,d} = i + t + d/10, Y_t = arm·c + i + t.
    pub fn tiny(n: usize, t_total: usize, te: usize, d: usize, c: f64) -> PanelDataset {
        let units = (0..n)
            .map(|i| {
                let arm = (i % 2) as u8;
                let surrogates = (0..=t_total)
                    .flat_map(|t| (0..d).map(move |k| i as f64 + t as f64 + k as f64 / 10.0))
                    .collect();
                let outcomes = (1..=t_total).map(|t| arm as f64 * c + i as f64 + t as f64).collect();
                UnitRecord::new(format!("u{i}"), arm, vec![], surrogates, outcomes)
            })
            .collect();
        PanelDataset::new(ExperimentWindow::new(te, t_total).unwrap(), d, 0, ColumnNames::standard(d, 0), units).unwrap()
    }
}
