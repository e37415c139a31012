//! Linear additive model using observational pre-period history.
//!
//! With breakpoints t_k = k·T_E < T (t_0 = 0), the estimate is
//!
//! ```text
//! τ̂_T = (1/N₁) Σ_k Σ_{i treated} Σ_s' p̂_k(s_i0, s') ĥ⁰_{T−t_k}(s')
//!      + (1/N₁) Σ_{i treated} ĥ_mid(s_i0)
//!      − (K+1) (1/N₀) Σ_{i control} ĥ⁰_T(s_i0)
//! ```
//!
//! where ĥ⁰_ℓ is the mean of Y_t given the state at t − ℓ over all-control windows
//! (pre-periods of every unit plus experimental periods of control units), p̂_k is
//! the treated units' transition from S_{−t_{k−1}} to S_{Δ_k}, and ĥ_mid maps
//! S_{−t_K} to Y_{Δ_{K+1}} within the treated arm. Expectations are exact sums.

use super::binning::{covariate_cells, Binning};
use super::discrete::{StateSpace, ZeroSupportPolicy};
use crate::error::{Error, Result};
use crate::panel::{Observed, PanelDataset};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const ADVISORY: &str =
    "linear additive model assumes additive carryover effects; not advised in common settings (novelty effects violate it)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdditiveOptions {
    pub n_bins: usize,
    pub zero_support: ZeroSupportPolicy,
    pub use_covariates: bool,
    /// Target horizon; defaults to T.
    pub horizon: Option<usize>,
}

impl Default for AdditiveOptions {
    fn default() -> Self {
        AdditiveOptions { n_bins: 5, zero_support: ZeroSupportPolicy::NearestPopulated, use_covariates: true, horizon: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditiveEstimate {
    pub horizon: usize,
    pub estimate: f64,
    pub breakpoints: Vec<usize>,
    /// Per-breakpoint carryover terms (first sum).
    pub carryover_terms: Vec<f64>,
    pub treated_tail_term: f64,
    pub control_term: f64,
    pub advisory: &'static str,
}

type Index = BTreeMap<usize, (f64, usize)>;

fn mean_of(index: &Index) -> BTreeMap<usize, f64> {
    index.iter().map(|(&s, &(a, n))| (s, a / n as f64)).collect()
}

struct Lookup<'a> {
    space: &'a StateSpace,
    policy: ZeroSupportPolicy,
    arm: u8,
}

impl Lookup<'_> {
    fn get<'m, V>(&self, map: &'m BTreeMap<usize, V>, state: usize) -> Result<&'m V> {
        if let Some(v) = map.get(&state) {
            return Ok(v);
        }
        let err = || Error::ZeroSupport { arm: self.arm, state: self.space.split(state).0 };
        match self.policy {
            ZeroSupportPolicy::Abort => Err(err()),
            ZeroSupportPolicy::NearestPopulated => {
                let s = self.space.nearest(state, map.keys()).ok_or_else(err)?;
                Ok(&map[&s])
            }
        }
    }
}

fn control_index(obs: &Observed<'_>, space: &StateSpace, cells: &[usize], lag: usize) -> Index {
    let l = obs.pre_periods() as i64;
    let te = obs.t_experimental() as i64;
    let lag = lag as i64;
    let mut idx = Index::new();
    for i in 0..obs.n() {
        let last = if obs.arm(i) == 0 { te } else { 0 };
        for t in (lag - l).max(-l + 1)..=last {
            let s = space.state(obs.s_row_at(i, t - lag), cells[i]);
            let e = idx.entry(s).or_insert((0.0, 0));
            e.0 += obs.y_at(i, t);
            e.1 += 1;
        }
    }
    idx
}

pub fn estimate_linear_additive(ds: &PanelDataset, opts: &AdditiveOptions) -> Result<AdditiveEstimate> {
    let obs = ds.observed();
    let te = obs.t_experimental();
    let horizon = opts.horizon.unwrap_or(obs.t_total());
    if horizon <= te || horizon > obs.t_total() {
        return Err(Error::arg("estimators", format!("horizon {horizon} must lie in T_E+1..=T")));
    }
    let breakpoints: Vec<usize> = (1..).map(|k| k * te).take_while(|&t| t < horizon).collect();
    let k_count = breakpoints.len();
    let t_k = *breakpoints.last().expect("horizon > T_E gives at least one breakpoint");
    let needed = (horizon - breakpoints[0]).max(t_k);
    let l = obs.pre_periods();
    if l < needed {
        return Err(Error::arg(
            "estimators",
            format!("linear additive model needs {needed} observational pre-periods, panel has {l}"),
        ));
    }

    let columns: Vec<Vec<f64>> = (0..obs.d())
        .map(|d| {
            (0..obs.n())
                .flat_map(|i| (-(l as i64)..=te as i64).map(move |t| (i, t)))
                .map(|(i, t)| obs.s_row_at(i, t)[d])
                .collect()
        })
        .collect();
    let cells = if opts.use_covariates && obs.r() > 0 {
        covariate_cells(&(0..obs.n()).map(|i| obs.x(i)).collect::<Vec<_>>())
    } else {
        vec![0; obs.n()]
    };
    let space = StateSpace { binning: Binning::fit(&columns, opts.n_bins), n_cells: cells.iter().max().map_or(1, |m| m + 1) };
    let treated = obs.arm_indices(1);
    let control = obs.arm_indices(0);
    let st = |i: usize, t: i64| space.state(obs.s_row_at(i, t), cells[i]);
    let treated_lookup = Lookup { space: &space, policy: opts.zero_support, arm: 1 };
    let control_lookup = Lookup { space: &space, policy: opts.zero_support, arm: 0 };

    let mut carryover_terms = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let prev = if k == 0 { 0 } else { breakpoints[k - 1] } as i64;
        let delta = (breakpoints[k] as i64 - prev) as usize;
        let mut kernel: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
        for &j in &treated {
            let from = st(j, -prev);
            *kernel.entry(from).or_default().entry(st(j, delta as i64)).or_insert(0.0) += 1.0;
            *totals.entry(from).or_insert(0.0) += 1.0;
        }
        for (from, row) in kernel.iter_mut() {
            row.values_mut().for_each(|v| *v /= totals[from]);
        }
        let h = mean_of(&control_index(&obs, &space, &cells, horizon - breakpoints[k]));
        let mut acc = 0.0;
        for &i in &treated {
            let row = treated_lookup.get(&kernel, st(i, 0))?;
            for (&s2, &p) in row {
                acc += p * control_lookup.get(&h, s2)?;
            }
        }
        carryover_terms.push(acc / treated.len() as f64);
    }

    let last = horizon - t_k;
    let mut mid = Index::new();
    for &j in &treated {
        let e = mid.entry(st(j, -(t_k as i64))).or_insert((0.0, 0));
        e.0 += obs.y(j, last);
        e.1 += 1;
    }
    let mid = mean_of(&mid);
    let treated_tail_term =
        treated.iter().map(|&i| treated_lookup.get(&mid, st(i, 0)).copied()).sum::<Result<f64>>()? / treated.len() as f64;

    let h_full = mean_of(&control_index(&obs, &space, &cells, horizon));
    let control_term =
        control.iter().map(|&i| control_lookup.get(&h_full, st(i, 0)).copied()).sum::<Result<f64>>()? / control.len() as f64;

    let estimate = carryover_terms.iter().sum::<f64>() + treated_tail_term - (k_count + 1) as f64 * control_term;
    Ok(AdditiveEstimate {
        horizon,
        estimate,
        breakpoints,
        carryover_terms,
        treated_tail_term,
        control_term,
        advisory: ADVISORY,
    })
}
