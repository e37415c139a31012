//! Sharp-null permutation test and bootstrap bands around any trajectory estimator.
//!
//! Replicate m always draws from substream m of the run seed and results are
//! merged by replicate index, so output does not depend on the worker count.

use crate::error::{Error, Result};
use crate::estimators::EffectTrajectory;
use crate::numerics::special::normal_quantile;
use crate::numerics::{quantile_sorted, RandomStream};
use crate::panel::PanelDataset;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Anything that maps a panel to an effect trajectory.
pub type Estimator<'a> = dyn Fn(&PanelDataset) -> Result<EffectTrajectory> + Sync + 'a;

/// Replicates may fail up to this fraction before the whole run is an error.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct PermutationResult {
    pub period: usize,
    pub observed_statistic: f64,
    pub replicate_statistics: Vec<f64>,
    pub p_value: f64,
    /// Replicates requested.
    pub m: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMethod {
    RandomizationBootstrap,
    SubsampleBootstrap,
}

#[derive(Debug, Clone, Serialize)]
pub struct CiBand {
    pub method: BandMethod,
    pub level: f64,
    /// Successful replicas.
    pub replicas: usize,
    pub failures: usize,
    /// Indexed by period − 1 for t = 1..=T.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Replicate variance per period.
    pub variance: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate_trajectories: Option<Vec<EffectTrajectory>>,
}

impl CiBand {
    pub fn apply(&self, tr: EffectTrajectory) -> Result<EffectTrajectory> {
        tr.with_band(&self.lower, &self.upper)
    }
}

/// Runs `m` replicates in parallel; failures are counted and dropped.
fn run_replicates<F>(m: usize, make: F) -> Result<(Vec<EffectTrajectory>, usize)>
where
    F: Fn(usize) -> Result<EffectTrajectory> + Sync,
{
    let results: Vec<Result<EffectTrajectory>> = (0..m).into_par_iter().map(&make).collect();
    let mut ok = Vec::with_capacity(m);
    let mut failures = 0;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(tr) => ok.push(tr),
            Err(e) => {
                failures += 1;
                last_err = Some(e);
            }
        }
    }
    if failures > 0 {
        log::warn!("inference: {failures} of {m} replicates failed");
    }
    if failures as f64 > MAX_FAILURE_RATE * m as f64 || ok.is_empty() {
        let cause = last_err.map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Inference(format!("{failures} of {m} replicates failed (last: {cause})")));
    }
    Ok((ok, failures))
}

fn permuted_arms(ds: &PanelDataset, rng: &mut RandomStream) -> Vec<u8> {
    let mut arms: Vec<u8> = ds.units().iter().map(|u| u.arm).collect();
    rng.shuffle(&mut arms);
    arms
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::arg("inference", "at least one replicate is required"));
    }
    Ok(())
}

/// Sharp-null test on τ̂_T.
pub fn permutation_test(ds: &PanelDataset, estimator: &Estimator<'_>, m: usize, seed: u64) -> Result<PermutationResult> {
    permutation_test_at(ds, estimator, m, seed, ds.window().t_total())
}

/// Sharp-null test on τ̂ at `period`: arm labels are re-drawn with the arm counts
/// held fixed while (Y, S) stay unchanged.
pub fn permutation_test_at(
    ds: &PanelDataset,
    estimator: &Estimator<'_>,
    m: usize,
    seed: u64,
    period: usize,
) -> Result<PermutationResult> {
    check_m(m)?;
    if period == 0 || period > ds.window().t_total() {
        return Err(Error::arg("inference", format!("period {period} outside 1..=T")));
    }
    let observed = estimator(ds)?.at(period);
    let root = RandomStream::new(seed);
    let (reps, failures) = run_replicates(m, |k| {
        let mut rng = root.substream(k as u64);
        estimator(&ds.with_arms(&permuted_arms(ds, &mut rng))?)
    })?;
    let stats: Vec<f64> = reps.iter().map(|r| r.at(period)).collect();
    let exceed = stats.iter().filter(|s| s.abs() > observed.abs()).count();
    Ok(PermutationResult {
        period,
        observed_statistic: observed,
        p_value: exceed as f64 / stats.len() as f64,
        replicate_statistics: stats,
        m,
        failures,
    })
}

fn variances(reps: &[EffectTrajectory], t: usize) -> Vec<f64> {
    let n = reps.len() as f64;
    (1..=t)
        .map(|p| {
            if reps.len() < 2 {
                return 0.0;
            }
            // shifted by the first replicate so equal replicates give exactly 0
            let x0 = reps[0].at(p);
            let mean = reps.iter().map(|r| r.at(p) - x0).sum::<f64>() / n;
            reps.iter().map(|r| (r.at(p) - x0 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect()
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::arg("inference", format!("level {level} must lie in (0,1)")));
    }
    Ok(())
}

/// Label re-randomization variance with a normal band τ̂ ± z·sd per period.
pub fn randomization_bootstrap(
    ds: &PanelDataset,
    estimator: &Estimator<'_>,
    m: usize,
    seed: u64,
    level: f64,
) -> Result<CiBand> {
    check_m(m)?;
    check_level(level)?;
    let point = estimator(ds)?;
    let root = RandomStream::new(seed);
    let (reps, failures) = run_replicates(m, |k| {
        let mut rng = root.substream(k as u64);
        estimator(&ds.with_arms(&permuted_arms(ds, &mut rng))?)
    })?;
    let t = point.t_total();
    let variance = variances(&reps, t);
    let z = normal_quantile(0.5 + level / 2.0);
    let half: Vec<f64> = variance.iter().map(|v| z * v.sqrt()).collect();
    Ok(CiBand {
        method: BandMethod::RandomizationBootstrap,
        level,
        replicas: reps.len(),
        failures,
        lower: (1..=t).map(|p| point.at(p) - half[p - 1]).collect(),
        upper: (1..=t).map(|p| point.at(p) + half[p - 1]).collect(),
        variance,
        replicate_trajectories: None,
    })
}

/// Indices of a with-replacement resample of ⌊fraction·N_a⌋ units (at least 1) per arm.
fn stratified_resample(ds: &PanelDataset, fraction: f64, rng: &mut RandomStream) -> Vec<usize> {
    let obs = ds.observed();
    let mut idx = Vec::new();
    for arm in [0u8, 1] {
        let members = obs.arm_indices(arm);
        let k = ((fraction * members.len() as f64).floor() as usize).max(1);
        idx.extend((0..k).map(|_| members[rng.below(members.len())]));
    }
    idx
}

/// Refits the estimator on arm-stratified resamples; percentile band per period.
/// Replicate trajectories are returned for MSE reporting.
pub fn subsample_bootstrap(
    ds: &PanelDataset,
    estimator: &Estimator<'_>,
    replicas: usize,
    fraction: f64,
    seed: u64,
    level: f64,
) -> Result<CiBand> {
    check_m(replicas)?;
    check_level(level)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::arg("inference", format!("fraction {fraction} must lie in (0,1]")));
    }
    let root = RandomStream::new(seed);
    let (reps, failures) = run_replicates(replicas, |k| {
        let mut rng = root.substream(k as u64);
        estimator(&ds.resample(&stratified_resample(ds, fraction, &mut rng))?)
    })?;
    let t = reps[0].t_total();
    let (lo_q, hi_q) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut lower = Vec::with_capacity(t);
    let mut upper = Vec::with_capacity(t);
    for p in 1..=t {
        let mut v: Vec<f64> = reps.iter().map(|r| r.at(p)).collect();
        v.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&v, lo_q));
        upper.push(quantile_sorted(&v, hi_q));
    }
    Ok(CiBand {
        method: BandMethod::SubsampleBootstrap,
        level,
        replicas: reps.len(),
        failures,
        lower,
        upper,
        variance: variances(&reps, t),
        replicate_trajectories: Some(reps),
    })
}

#[cfg(test)]
mod tests;
