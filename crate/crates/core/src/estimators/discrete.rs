//! Discrete longitudinal plug-in estimator.
//!
//! States are bin vectors of the surrogates combined with the covariate cell.
//! Within each arm the horizon t is split into K = ⌈t/T_E⌉ − 1 blocks of length
//! T_E followed by a last block Δ = t − K·T_E. The block kernel Ĝ maps the state
//! at period 0 to the state at T_E, and ĥ_Δ is the mean of Y_Δ given the period-0
//! state. The nested expectation is evaluated by simulating chains through Ĝ.

use super::binning::{covariate_cells, Binning};
use super::trajectory::EffectTrajectory;
use crate::error::{Error, Result};
use crate::numerics::RandomStream;
use crate::panel::{observed_effects, Observed, PanelDataset};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSupportPolicy {
    Abort,
    NearestPopulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscreteOptions {
    pub n_bins: usize,
    pub mc_draws: usize,
    pub zero_support: ZeroSupportPolicy,
    pub use_covariates: bool,
}

impl Default for DiscreteOptions {
    fn default() -> Self {
        DiscreteOptions { n_bins: 5, mc_draws: 10_000, zero_support: ZeroSupportPolicy::Abort, use_covariates: true }
    }
}

impl DiscreteOptions {
    pub fn fingerprint(&self, seed: u64) -> String {
        format!(
            "discrete(bins={},mc_draws={},zero_support={:?},covariates={},seed={seed})",
            self.n_bins, self.mc_draws, self.zero_support, self.use_covariates
        )
    }
}

/// Binned surrogates × covariate cells.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub binning: Binning,
    pub n_cells: usize,
}

impl StateSpace {
    pub fn state(&self, s: &[f64], cell: usize) -> usize {
        self.binning.state(s) * self.n_cells + cell
    }

    pub fn split(&self, state: usize) -> (Vec<usize>, usize) {
        (self.binning.decode(state / self.n_cells), state % self.n_cells)
    }

    /// Populated state closest in L1 bin distance within the same covariate cell;
    /// lowest id on ties.
    pub fn nearest<'a>(&self, state: usize, populated: impl Iterator<Item = &'a usize>) -> Option<usize> {
        let (bins, cell) = self.split(state);
        populated
            .filter_map(|&c| {
                let (b, cc) = self.split(c);
                (cc == cell).then(|| (b.iter().zip(&bins).map(|(x, y)| x.abs_diff(*y)).sum::<usize>(), c))
            })
            .min()
            .map(|(_, c)| c)
    }
}

/// Per-arm empirical block kernel and surrogate indices.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    pub arm: u8,
    /// Successor states at T_E, one entry per unit, keyed by period-0 state.
    pub successors: BTreeMap<usize, Vec<usize>>,
    /// `h[Δ−1][state]` = mean of Y_Δ given period-0 state.
    pub h: Vec<BTreeMap<usize, f64>>,
    /// Initial-state counts.
    pub initial: BTreeMap<usize, usize>,
}

impl DiscreteKernel {
    fn build(obs: &Observed<'_>, space: &StateSpace, cells: &[usize], arm: u8) -> DiscreteKernel {
        let te = obs.t_experimental();
        let mut successors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut sums: Vec<BTreeMap<usize, (f64, usize)>> = vec![BTreeMap::new(); te];
        let mut initial: BTreeMap<usize, usize> = BTreeMap::new();
        for i in obs.arm_indices(arm) {
            let s0 = space.state(obs.s_row(i, 0), cells[i]);
            successors.entry(s0).or_default().push(space.state(obs.s_row(i, te), cells[i]));
            *initial.entry(s0).or_default() += 1;
            for (k, m) in sums.iter_mut().enumerate() {
                let e = m.entry(s0).or_insert((0.0, 0));
                e.0 += obs.y(i, k + 1);
                e.1 += 1;
            }
        }
        let h = sums.into_iter().map(|m| m.into_iter().map(|(s, (a, n))| (s, a / n as f64)).collect()).collect();
        DiscreteKernel { arm, successors, h, initial }
    }

    /// Transition probabilities of the block kernel from `state`.
    pub fn transition(&self, state: usize) -> Option<BTreeMap<usize, f64>> {
        let succ = self.successors.get(&state)?;
        let mut p = BTreeMap::new();
        for &s in succ {
            *p.entry(s).or_insert(0.0) += 1.0 / succ.len() as f64;
        }
        Some(p)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteEstimate {
    pub trajectory: EffectTrajectory,
    /// Monte-Carlo standard error of τ̂_t for each future period.
    pub mc_se: Vec<f64>,
}

fn resolve(space: &StateSpace, kernel: &DiscreteKernel, state: usize, policy: ZeroSupportPolicy) -> Result<usize> {
    if kernel.successors.contains_key(&state) {
        return Ok(state);
    }
    match policy {
        ZeroSupportPolicy::Abort => Err(Error::ZeroSupport { arm: kernel.arm, state: space.split(state).0 }),
        ZeroSupportPolicy::NearestPopulated => space
            .nearest(state, kernel.successors.keys())
            .ok_or_else(|| Error::ZeroSupport { arm: kernel.arm, state: space.split(state).0 }),
    }
}

/// Mean and MC variance of the mean for one initial state.
fn simulate_state(
    space: &StateSpace,
    kernel: &DiscreteKernel,
    start: usize,
    k_blocks: usize,
    last: usize,
    draws: usize,
    policy: ZeroSupportPolicy,
    mut rng: RandomStream,
) -> Result<(f64, f64)> {
    let h = &kernel.h[last - 1];
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        let mut s = start;
        for _ in 0..k_blocks {
            let s_ok = resolve(space, kernel, s, policy)?;
            let succ = &kernel.successors[&s_ok];
            s = succ[rng.below(succ.len())];
        }
        let s_ok = resolve(space, kernel, s, policy)?;
        let v = h[&s_ok];
        sum += v;
        sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = if draws > 1 { ((sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok((mean, var / n))
}

pub fn state_space(obs: &Observed<'_>, n_bins: usize, use_covariates: bool) -> (StateSpace, Vec<usize>) {
    let te = obs.t_experimental();
    let columns: Vec<Vec<f64>> = (0..obs.d())
        .map(|d| (0..obs.n()).flat_map(|i| (0..=te).map(move |t| (i, t))).map(|(i, t)| obs.s(i, t, d)).collect())
        .collect();
    let cells = if use_covariates && obs.r() > 0 {
        let rows: Vec<&[f64]> = (0..obs.n()).map(|i| obs.x(i)).collect();
        covariate_cells(&rows)
    } else {
        vec![0; obs.n()]
    };
    let n_cells = cells.iter().max().map_or(1, |m| m + 1);
    (StateSpace { binning: Binning::fit(&columns, n_bins), n_cells }, cells)
}

pub fn build_kernels(ds: &PanelDataset, opts: &DiscreteOptions) -> (StateSpace, [DiscreteKernel; 2]) {
    let obs = ds.observed();
    let (space, cells) = state_space(&obs, opts.n_bins, opts.use_covariates);
    let k0 = DiscreteKernel::build(&obs, &space, &cells, 0);
    let k1 = DiscreteKernel::build(&obs, &space, &cells, 1);
    (space, [k0, k1])
}

/// Plug-in estimate of τ̂_t for every future period, with MC standard errors.
pub fn estimate_longitudinal_discrete(ds: &PanelDataset, opts: &DiscreteOptions, seed: u64) -> Result<DiscreteEstimate> {
    if opts.mc_draws == 0 {
        return Err(Error::arg("estimators", "mc_draws must be positive"));
    }
    let w = ds.window();
    let te = w.t_experimental();
    let (space, kernels) = build_kernels(ds, opts);
    let root = RandomStream::new(seed).substream(0x6469_7363);
    let mut future = Vec::new();
    let mut mc_se = Vec::new();
    for t in te + 1..=w.t_total() {
        let k_blocks = t.div_ceil(te) - 1;
        let last = t - k_blocks * te;
        let mut arm_mean = [0.0; 2];
        let mut arm_var = [0.0; 2];
        for (a, kernel) in kernels.iter().enumerate() {
            let n: usize = kernel.initial.values().sum();
            let starts: Vec<(usize, usize)> = kernel.initial.iter().map(|(&s, &c)| (s, c)).collect();
            let per_state = starts
                .par_iter()
                .map(|&(s, _)| {
                    let rng = root.substream(a as u64).substream(t as u64).substream(s as u64);
                    simulate_state(&space, kernel, s, k_blocks, last, opts.mc_draws, opts.zero_support, rng)
                })
                .collect::<Result<Vec<_>>>()?;
            for (&(_, c), (m, v)) in starts.iter().zip(per_state) {
                let wgt = c as f64 / n as f64;
                arm_mean[a] += wgt * m;
                arm_var[a] += wgt * wgt * v;
            }
        }
        future.push(arm_mean[1] - arm_mean[0]);
        mc_se.push((arm_var[0] + arm_var[1]).sqrt());
    }
    let observed = observed_effects(ds, te)?;
    let trajectory = EffectTrajectory::from_parts("discrete", opts.fingerprint(seed), observed, &future);
    Ok(DiscreteEstimate { trajectory, mc_se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{ColumnNames, ExperimentWindow, UnitRecord};

    fn unit(id: usize, arm: u8, s: &[f64], y: &[f64]) -> UnitRecord {
        UnitRecord::new(id.to_string(), arm, vec![], s.to_vec(), y.to_vec())
    }

    /// Exact nested expectation by propagating state distributions.
    fn enumerate(kernel: &DiscreteKernel, t: usize, te: usize) -> f64 {
        let k_blocks = t.div_ceil(te) - 1;
        let last = t - k_blocks * te;
        let n: usize = kernel.initial.values().sum();
        let mut dist: BTreeMap<usize, f64> = kernel.initial.iter().map(|(&s, &c)| (s, c as f64 / n as f64)).collect();
        for _ in 0..k_blocks {
            let mut next = BTreeMap::new();
            for (&s, &p) in &dist {
                for (s2, q) in kernel.transition(s).unwrap() {
                    *next.entry(s2).or_insert(0.0) += p * q;
                }
            }
            dist = next;
        }
        dist.iter().map(|(s, p)| p * kernel.h[last - 1][s]).sum()
    }

    fn two_bin_panel() -> PanelDataset {
        // 1 surrogate with values {0,1}; T_E = 2, T = 5
        let units = vec![
            unit(0, 0, &[0., 0., 1., 0., 0., 0.], &[1.0, 2.0, 0.0, 0.0, 0.0]),
            unit(1, 0, &[1., 1., 0., 0., 0., 0.], &[3.0, 0.5, 0.0, 0.0, 0.0]),
            unit(2, 0, &[0., 1., 0., 0., 0., 0.], &[2.0, 1.0, 0.0, 0.0, 0.0]),
            unit(3, 1, &[0., 0., 0., 0., 0., 0.], &[1.5, 2.5, 0.0, 0.0, 0.0]),
            unit(4, 1, &[1., 0., 1., 0., 0., 0.], &[4.0, 1.0, 0.0, 0.0, 0.0]),
            unit(5, 1, &[1., 1., 0., 0., 0., 0.], &[0.0, 3.0, 0.0, 0.0, 0.0]),
        ];
        PanelDataset::new(ExperimentWindow::new(2, 5).unwrap(), 1, 0, ColumnNames::standard(1, 0), units).unwrap()
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let ds = two_bin_panel();
        let opts = DiscreteOptions { n_bins: 2, mc_draws: 20_000, ..Default::default() };
        let est = estimate_longitudinal_discrete(&ds, &opts, 11).unwrap();
        let (_, kernels) = build_kernels(&ds, &opts);
        for t in 3..=5 {
            let exact = enumerate(&kernels[1], t, 2) - enumerate(&kernels[0], t, 2);
            let se = est.mc_se[t - 3];
            assert!(se > 0.0);
            assert!((est.trajectory.at(t) - exact).abs() <= 3.0 * se, "t={t}");
        }
    }

    #[test]
    fn deterministic_kernel_is_exact() {
        // each state maps to a single successor
        let units = vec![
            unit(0, 0, &[0., 5., 1., 9., 9.], &[1.0, 2.0, 0.0, 0.0]),
            unit(1, 0, &[1., 5., 1., 9., 9.], &[3.0, 4.0, 0.0, 0.0]),
            unit(2, 1, &[0., 5., 0., 9., 9.], &[1.0, 7.0, 0.0, 0.0]),
            unit(3, 1, &[1., 5., 0., 9., 9.], &[2.0, 8.0, 0.0, 0.0]),
        ];
        let ds = PanelDataset::new(ExperimentWindow::new(2, 4).unwrap(), 1, 0, ColumnNames::standard(1, 0), units).unwrap();
        let opts = DiscreteOptions { n_bins: 3, mc_draws: 50, ..Default::default() };
        let est = estimate_longitudinal_discrete(&ds, &opts, 0).unwrap();
        assert!(est.mc_se.iter().all(|&s| s == 0.0));
        // t=3: K=1, Δ=1. control: both → state(1) → ĥ_1 = 3; treated: both → state(0) → ĥ_1 = 1
        assert_eq!(est.trajectory.at(3), 1.0 - 3.0);
        // t=4: K=1, Δ=2. control ĥ_2(1) = 4, treated ĥ_2(0) = 7
        assert_eq!(est.trajectory.at(4), 7.0 - 4.0);
    }

    #[test]
    fn zero_support_policies() {
        // treated unit moves into state 2, never seen at period 0 in the treated arm
        let units = vec![
            unit(0, 0, &[0., 0., 2., 0., 0.], &[1.0, 1.0, 0.0, 0.0]),
            unit(1, 0, &[2., 0., 2., 0., 0.], &[1.0, 1.0, 0.0, 0.0]),
            unit(2, 1, &[0., 0., 2., 0., 0.], &[1.0, 1.0, 0.0, 0.0]),
            unit(3, 1, &[1., 0., 1., 0., 0.], &[5.0, 6.0, 0.0, 0.0]),
        ];
        let ds = PanelDataset::new(ExperimentWindow::new(2, 4).unwrap(), 1, 0, ColumnNames::standard(1, 0), units).unwrap();
        let opts = DiscreteOptions { n_bins: 3, mc_draws: 10, ..Default::default() };
        match estimate_longitudinal_discrete(&ds, &opts, 0) {
            Err(Error::ZeroSupport { arm: 1, state }) => assert_eq!(state, vec![2]),
            other => panic!("{other:?}"),
        }
        let opts = DiscreteOptions { zero_support: ZeroSupportPolicy::NearestPopulated, ..opts };
        let est = estimate_longitudinal_discrete(&ds, &opts, 0).unwrap();
        assert!(est.trajectory.last().is_finite());
    }

    #[test]
    fn nearest_prefers_lowest_id_on_ties() {
        let space = StateSpace { binning: Binning { edges: vec![vec![0.5, 1.5]] }, n_cells: 1 };
        let populated = [0usize, 2];
        assert_eq!(space.nearest(1, populated.iter()), Some(0));
    }
}
