//! Assumption diagnostics: the direct comparability test, the parallel-trends
//! test, and two sensitivity analyses for the surrogacy assumption.
//!
//! Matching is exact on binned surrogates. Edges are fitted on the pooled values
//! of S_{t−δ} and S_{t′−δ} across both arms so every cell has one meaning on both
//! sides. Treatment starts at period 1 and never switches, so the block
//! W_{t−δ+1:t} equals the unit's arm and matching on it means matching within arm.

use crate::error::{Error, Result};
use crate::estimators::binning::{covariate_cells, Binning};
use crate::estimators::compute_metrics;
use crate::inference::Estimator;
use crate::numerics::{coefficient_t_test, ols_fit, welch_t_test, Matrix, RandomStream};
use crate::panel::{Observed, PanelDataset};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchOptions {
    pub n_bins: usize,
    pub use_covariates: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { n_bins: 5, use_covariates: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    fn arm(self) -> u8 {
        match self {
            Group::Control => 0,
            Group::Treatment => 1,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Treatment => "treatment",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumTest {
    pub cell: usize,
    pub n_t: usize,
    pub n_t_prime: usize,
    pub statistic: Option<f64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumTestSummary {
    pub group: Group,
    pub t: usize,
    pub t_prime: usize,
    pub delta: usize,
    pub n_tests: usize,
    pub n_p_below_10: usize,
    pub n_p_below_05: usize,
    pub pct_below_10: f64,
    pub pct_below_05: f64,
    /// Cells populated on only one side.
    pub n_excluded_unmatched: usize,
    /// Cells matched on both sides but with fewer than two observations on one.
    pub n_excluded_small: usize,
    /// Bins used per surrogate dimension.
    pub bins_per_dim: Vec<usize>,
    pub strata: Vec<StratumTest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelTrendsResult {
    pub t: usize,
    pub t_prime: usize,
    pub delta: usize,
    /// β₀..β₃ of Y = β₀ + β₁·W + β₂·1[period=t] + β₃·W·1[period=t].
    pub beta: [f64; 4],
    pub beta3_hat: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    /// Matched pairs in control and treatment.
    pub matched_pairs: [usize; 2],
    pub bins_per_dim: Vec<usize>,
}

struct Matcher<'a> {
    obs: Observed<'a>,
    binning: Binning,
    cells: Vec<usize>,
    n_states: usize,
}

impl<'a> Matcher<'a> {
    fn new(ds: &'a PanelDataset, t: usize, t_prime: usize, delta: usize, opts: &MatchOptions) -> Result<Self> {
        let obs = ds.observed();
        let te = obs.t_experimental();
        if t == t_prime {
            return Err(Error::arg("validation", "t and t' must differ"));
        }
        if delta == 0 || delta > t.min(t_prime) {
            return Err(Error::arg("validation", format!("delta {delta} must lie in 1..=min(t, t')")));
        }
        if t.max(t_prime) > te {
            return Err(Error::arg("validation", format!("t and t' must be observed periods (at most T_E = {te})")));
        }
        if opts.n_bins == 0 {
            return Err(Error::arg("validation", "n_bins must be at least 1"));
        }
        let columns: Vec<Vec<f64>> = (0..obs.d())
            .map(|d| {
                (0..obs.n())
                    .flat_map(|i| [obs.s(i, t - delta, d), obs.s(i, t_prime - delta, d)])
                    .collect()
            })
            .collect();
        let binning = Binning::fit(&columns, opts.n_bins);
        let cells = if opts.use_covariates && obs.r() > 0 {
            covariate_cells(&(0..obs.n()).map(|i| obs.x(i)).collect::<Vec<_>>())
        } else {
            vec![0; obs.n()]
        };
        let n_states = binning.n_states();
        Ok(Matcher { obs, binning, cells, n_states })
    }

    fn cell(&self, i: usize, period: usize) -> usize {
        self.cells[i] * self.n_states + self.binning.state(self.obs.s_row(i, period))
    }

    fn bins_per_dim(&self) -> Vec<usize> {
        (0..self.binning.dims()).map(|d| self.binning.bins_in(d)).collect()
    }

    /// Cell → outcomes of the arm's units at `period`, matched on S at `period − delta`.
    fn pool(&self, arm: u8, period: usize, delta: usize) -> BTreeMap<usize, Vec<f64>> {
        let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for i in self.obs.arm_indices(arm) {
            out.entry(self.cell(i, period - delta)).or_default().push(self.obs.y(i, period));
        }
        out
    }
}

/// Welch test of Y_t against Y_{t′} within every matched cell, per arm.
pub fn comparability_test(
    ds: &PanelDataset,
    t: usize,
    t_prime: usize,
    delta: usize,
    opts: &MatchOptions,
) -> Result<Vec<StratumTestSummary>> {
    let m = Matcher::new(ds, t, t_prime, delta, opts)?;
    let mut out = Vec::with_capacity(2);
    for group in [Group::Treatment, Group::Control] {
        let a = m.pool(group.arm(), t, delta);
        let b = m.pool(group.arm(), t_prime, delta);
        let mut strata = Vec::new();
        let (mut unmatched, mut small) = (0, 0);
        for key in a.keys().chain(b.keys().filter(|k| !a.contains_key(k))) {
            match (a.get(key), b.get(key)) {
                (Some(x), Some(y)) if x.len() >= 2 && y.len() >= 2 => {
                    let r = welch_t_test(x, y)?;
                    strata.push(StratumTest {
                        cell: *key,
                        n_t: x.len(),
                        n_t_prime: y.len(),
                        statistic: r.statistic.is_finite().then_some(r.statistic),
                        p_value: r.p_value,
                    });
                }
                (Some(_), Some(_)) => small += 1,
                _ => unmatched += 1,
            }
        }
        strata.sort_by_key(|s| s.cell);
        let n = strata.len();
        let p10 = strata.iter().filter(|s| s.p_value < 0.1).count();
        let p05 = strata.iter().filter(|s| s.p_value < 0.05).count();
        let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        out.push(StratumTestSummary {
            group,
            t,
            t_prime,
            delta,
            n_tests: n,
            n_p_below_10: p10,
            n_p_below_05: p05,
            pct_below_10: frac(p10),
            pct_below_05: frac(p05),
            n_excluded_unmatched: unmatched,
            n_excluded_small: small,
            bins_per_dim: m.bins_per_dim(),
            strata,
        });
    }
    if out.iter().all(|s| s.n_tests == 0) {
        return Err(Error::Diagnostic(format!(
            "no cell has two or more observations in both periods {t} and {t_prime}; use coarser binning"
        )));
    }
    Ok(out)
}

/// Matched pairs (Y_{i,t}, Y_{i′,t′}) within an arm; i′ drawn at random among exact matches.
fn matched_pairs(m: &Matcher<'_>, arm: u8, t: usize, t_prime: usize, delta: usize, rng: &mut RandomStream) -> Vec<(f64, f64)> {
    let mut candidates: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let members = m.obs.arm_indices(arm);
    for &j in &members {
        candidates.entry(m.cell(j, t_prime - delta)).or_default().push(j);
    }
    members
        .iter()
        .filter_map(|&i| {
            let pool = candidates.get(&m.cell(i, t - delta))?;
            let j = pool[rng.below(pool.len())];
            Some((m.obs.y(i, t), m.obs.y(j, t_prime)))
        })
        .collect()
}

/// Difference-in-differences t-test on matched pairs, H₀: β₃ = 0.
pub fn parallel_trends_test(
    ds: &PanelDataset,
    t: usize,
    t_prime: usize,
    delta: usize,
    opts: &MatchOptions,
    seed: u64,
    level: f64,
) -> Result<ParallelTrendsResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::arg("validation", format!("level {level} must lie in (0,1)")));
    }
    let m = Matcher::new(ds, t, t_prime, delta, opts)?;
    let root = RandomStream::new(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut counts = [0usize; 2];
    for arm in [0u8, 1] {
        let pairs = matched_pairs(&m, arm, t, t_prime, delta, &mut root.substream(arm as u64));
        if pairs.is_empty() {
            return Err(Error::Diagnostic(format!("arm {arm} has no matched pairs between periods {t} and {t_prime}")));
        }
        counts[arm as usize] = pairs.len();
        let w = arm as f64;
        for (yt, ytp) in pairs {
            rows.push(vec![w, 1.0, w]);
            y.push(yt);
            rows.push(vec![w, 0.0, 0.0]);
            y.push(ytp);
        }
    }
    let fit = ols_fit(&Matrix::from_rows(&rows), &y, None)?;
    let test = coefficient_t_test(&fit, 2)?;
    let b = &fit.coefficients;
    Ok(ParallelTrendsResult {
        t,
        t_prime,
        delta,
        beta: [fit.intercept, b[0], b[1], b[2]],
        beta3_hat: b[2],
        t_statistic: test.statistic,
        p_value: test.p_value,
        level,
        reject: test.p_value < level,
        matched_pairs: counts,
        bins_per_dim: m.bins_per_dim(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityPoint {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<usize>>,
    pub bias: f64,
    pub signed_error: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityCurve {
    pub analysis: String,
    pub estimator: String,
    pub points: Vec<SensitivityPoint>,
}

/// ζ variance: mean over experimental periods of the pooled per-period variance of Y.
fn mean_outcome_variance(obs: &Observed<'_>) -> f64 {
    let n = obs.n() as f64;
    let te = obs.t_experimental();
    (1..=te)
        .map(|t| {
            let mean = (0..obs.n()).map(|i| obs.y(i, t)).sum::<f64>() / n;
            (0..obs.n()).map(|i| (obs.y(i, t) - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum::<f64>()
        / te as f64
}

/// Adds θ·ζ to every treated outcome, with ζ ~ N(0, v) unobserved, and reports
/// the estimator's error against `truth` per θ.
pub fn sensitivity_omitted_surrogate(
    ds: &PanelDataset,
    estimator: &Estimator<'_>,
    theta_grid: &[f64],
    truth: &[f64],
    seed: u64,
) -> Result<SensitivityCurve> {
    if !theta_grid.contains(&0.0) {
        return Err(Error::arg("validation", "theta grid must contain 0"));
    }
    let obs = ds.observed();
    let sd = mean_outcome_variance(&obs).sqrt();
    let t_total = obs.t_total();
    let mut rng = RandomStream::new(seed).substream(0x7a65_7461);
    let zeta: Vec<f64> = (0..obs.n() * t_total).map(|_| sd * rng.normal()).collect();
    let arms: Vec<u8> = (0..obs.n()).map(|i| obs.arm(i)).collect();
    let points = theta_grid
        .par_iter()
        .map(|&theta| {
            let tr = if theta == 0.0 {
                estimator(ds)?
            } else {
                let perturbed = ds.map_outcomes(|i, t, y| {
                    if arms[i] == 1 {
                        y + theta * zeta[i * t_total + t - 1]
                    } else {
                        y
                    }
                })?;
                estimator(&perturbed)?
            };
            let m = compute_metrics(&tr, truth, None)?;
            Ok(SensitivityPoint {
                label: format!("theta={theta}"),
                theta: Some(theta),
                subset: None,
                bias: m.bias,
                signed_error: m.signed_error,
                rmse: m.mse.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let name = estimator(ds)?.estimator;
    Ok(SensitivityCurve { analysis: "omitted_surrogate".into(), estimator: name, points })
}

/// Re-runs the estimator on each surrogate subset (the full set is added first when absent).
pub fn sensitivity_surrogate_subsets(
    ds: &PanelDataset,
    estimator: &Estimator<'_>,
    subsets: &[Vec<usize>],
    truth: &[f64],
) -> Result<SensitivityCurve> {
    let d = ds.d_surrogates();
    let full: Vec<usize> = (0..d).collect();
    let mut all: Vec<Vec<usize>> = Vec::with_capacity(subsets.len() + 1);
    if !subsets.contains(&full) {
        all.push(full.clone());
    }
    for s in subsets {
        if s.is_empty() {
            return Err(Error::arg("validation", "surrogate subsets must be non-empty"));
        }
        if let Some(bad) = s.iter().find(|&&k| k >= d) {
            return Err(Error::arg("validation", format!("surrogate column {bad} does not exist (D = {d})")));
        }
        all.push(s.clone());
    }
    let points = all
        .par_iter()
        .map(|s| {
            let tr = if *s == full { estimator(ds)? } else { estimator(&ds.select_surrogates(s)?)? };
            let m = compute_metrics(&tr, truth, None)?;
            Ok(SensitivityPoint {
                label: format!("{s:?}"),
                theta: None,
                subset: Some(s.clone()),
                bias: m.bias,
                signed_error: m.signed_error,
                rmse: m.mse.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let name = estimator(ds)?.estimator;
    Ok(SensitivityCurve { analysis: "surrogate_subsets".into(), estimator: name, points })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub comparability: Vec<StratumTestSummary>,
    pub parallel_trends: Vec<ParallelTrendsResult>,
    pub sensitivity: Vec<SensitivityCurve>,
}

impl ValidationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Diagnostic(e.to_string()))
    }

    /// Comparability summaries as `group,t,t_prime,n_tests,n_p10,n_p05,pct10,pct05`.
    pub fn write_comparability_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "group,t,t_prime,n_tests,n_p10,n_p05,pct10,pct05")?;
        for s in &self.comparability {
            writeln!(
                w,
                "{},{},{},{},{},{},{:.2},{:.2}",
                s.group.as_str(),
                s.t,
                s.t_prime,
                s.n_tests,
                s.n_p_below_10,
                s.n_p_below_05,
                100.0 * s.pct_below_10,
                100.0 * s.pct_below_05
            )?;
        }
        Ok(())
    }

    pub fn write_parallel_trends_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,t_prime,delta,beta3,t_statistic,p_value,reject,pairs_control,pairs_treatment")?;
        for r in &self.parallel_trends {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.t_prime,
                r.delta,
                r.beta3_hat,
                r.t_statistic,
                r.p_value,
                if r.reject { "yes" } else { "no" },
                r.matched_pairs[0],
                r.matched_pairs[1]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
