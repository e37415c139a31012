//! Synthetic panels with known effect curves.
//!
//! Outcomes follow Y_{t+1} = f(S_t). Control surrogates are redrawn iid every
//! period; treated surrogates start from S_0 and decay as S_{t+1} = κ·S_t.
//! Structural parameters (μ, σ) are drawn once per panel on substream 0 and
//! every chunk of units has its own substream, so output is independent of the
//! worker count.

use crate::error::{Error, Result};
use crate::numerics::RandomStream;
use crate::panel::{ColumnNames, ExperimentWindow, PanelDataset, UnitRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: usize = 2048;
const TRUTH_STREAM: u64 = 0x7472_7574_6800_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Stabilized1,
    Stabilized2,
    ComparabilityViolation,
    Nonlinear,
    NoEffect,
    /// One three-valued surrogate with linear conditional means.
    DiscreteMarkov,
}

impl SynthKind {
    pub fn d(&self) -> usize {
        match self {
            SynthKind::Stabilized1 | SynthKind::Stabilized2 | SynthKind::NoEffect => 4,
            SynthKind::ComparabilityViolation | SynthKind::Nonlinear => 2,
            SynthKind::DiscreteMarkov => 1,
        }
    }
}

/// Per-arm law of the discrete Markov kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovArm {
    /// Probability of keeping the current state; otherwise uniform over {0,1,2}.
    pub stay: f64,
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovParams {
    /// Distribution of the initial state over {0,1,2}.
    pub initial: [f64; 3],
    pub control: MarkovArm,
    pub treated: MarkovArm,
    pub noise_sd: f64,
}

impl Default for MarkovParams {
    fn default() -> Self {
        MarkovParams {
            initial: [0.5, 0.3, 0.2],
            control: MarkovArm { stay: 0.6, intercept: 0.0, slope: 1.0 },
            treated: MarkovArm { stay: 0.85, intercept: 0.5, slope: 1.5 },
            noise_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_per_arm: usize,
    pub t_total: usize,
    pub t_experimental: usize,
    pub seed: u64,
    /// Treated-arm multiplier on Y_2 (comparability violation).
    pub gamma: f64,
    /// Weight of the exponential term (nonlinear).
    pub theta: f64,
    /// Both arms follow the control law with no perturbation (sharp null).
    pub null_arms: bool,
    /// All-control history periods −L..=−1 before the experiment.
    pub observational_periods: usize,
    /// Fixed means / scales instead of drawing them.
    pub mu: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub markov: MarkovParams,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: SynthKind::Stabilized1,
            n_per_arm: 100_000,
            t_total: 10,
            t_experimental: 3,
            seed: 0,
            gamma: 1.0,
            theta: 1.0,
            null_arms: false,
            observational_periods: 0,
            mu: None,
            sigma: None,
            markov: MarkovParams::default(),
        }
    }
}

impl SynthSpec {
    pub fn new(kind: SynthKind, n_per_arm: usize, seed: u64) -> Self {
        SynthSpec { kind, n_per_arm, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        ExperimentWindow::new(self.t_experimental, self.t_total)?;
        if self.n_per_arm == 0 {
            return Err(Error::Config("synthgen: n_per_arm must be at least 1".into()));
        }
        let d = self.kind.d();
        for (name, v) in [("mu", &self.mu), ("sigma", &self.sigma)] {
            if let Some(v) = v {
                if v.len() != d {
                    return Err(Error::Config(format!("synthgen: {name} needs {d} values")));
                }
            }
        }
        if self.kind == SynthKind::DiscreteMarkov {
            let m = &self.markov;
            let total: f64 = m.initial.iter().sum();
            if (total - 1.0).abs() > 1e-9 || m.initial.iter().any(|&p| p < 0.0) {
                return Err(Error::Config("synthgen: markov.initial must be a probability vector".into()));
            }
            if [m.control.stay, m.treated.stay].iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Config("synthgen: markov stay probabilities must lie in [0,1]".into()));
            }
        }
        Ok(())
    }
}

/// Parameters shared by the panel and every truth computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub decay: Vec<f64>,
    pub weights: Vec<f64>,
    pub outcome_sign: f64,
    /// Added to the control arm's surrogate means.
    pub control_shift: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl StructuralParams {
    pub fn draw(spec: &SynthSpec) -> StructuralParams {
        let mut rng = RandomStream::new(spec.seed).substream(0);
        let d = spec.kind.d();
        // means and scales are drawn with their sign flipped to positive
        let (mu_c, sd_c) = match spec.kind {
            SynthKind::Stabilized2 => (1.5, 1.0),
            _ => (2.0, 2.0),
        };
        let mut mu: Vec<f64> = (0..d).map(|_| (mu_c + rng.normal()).abs()).collect();
        let mut sigma: Vec<f64> = (0..d).map(|_| (sd_c + rng.normal()).abs()).collect();
        if let Some(m) = &spec.mu {
            mu = m.clone();
        }
        if let Some(s) = &spec.sigma {
            sigma = s.iter().map(|v| v.abs()).collect();
        }
        let (decay, weights, sign, shift) = match spec.kind {
            SynthKind::Stabilized1 | SynthKind::NoEffect => (vec![0.8, 0.6, 0.4, 0.2], vec![0.1, 0.1, 0.4, 0.4], -1.0, 0.0),
            SynthKind::Stabilized2 => (vec![0.8, 0.6, 0.4, 0.2], vec![0.1, 0.1, 0.4, 0.4], 1.0, -2.0),
            SynthKind::ComparabilityViolation => (vec![0.8, 0.6], vec![0.1, 0.4], -1.0, 0.0),
            SynthKind::Nonlinear => (vec![0.8, 0.6], vec![1.0, 1.0], -1.0, 0.0),
            SynthKind::DiscreteMarkov => (vec![1.0], vec![1.0], 1.0, 0.0),
        };
        StructuralParams { mu, sigma, decay, weights, outcome_sign: sign, control_shift: shift, gamma: spec.gamma, theta: spec.theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMethod {
    AnalyticLimit,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthOracle {
    /// τ_t for t = 1..=T.
    pub tau: Vec<f64>,
    pub method: TruthMethod,
    pub mc_se: Option<Vec<f64>>,
    pub params: StructuralParams,
}

struct UnitDraw {
    s: Vec<f64>,
    y: Vec<f64>,
    pre_s: Vec<f64>,
    pre_y: Vec<f64>,
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    p: &'a StructuralParams,
}

impl Generator<'_> {
    fn treated_effective(&self, arm: u8) -> bool {
        arm == 1 && !self.spec.null_arms
    }

    /// Base outcome f(S) without treatment perturbations.
    fn base_outcome(&self, s: &[f64]) -> f64 {
        let p = self.p;
        match self.spec.kind {
            SynthKind::Nonlinear => p.outcome_sign * (s[0] + p.theta * s[1].exp()),
            _ => p.outcome_sign * s.iter().zip(&p.weights).map(|(a, b)| a * b).sum::<f64>(),
        }
    }

    /// Y_t from S_{t−1} for t ≥ 1.
    fn outcome(&self, t: usize, s_prev: &[f64], treated: bool) -> f64 {
        let base = self.base_outcome(s_prev);
        if !treated {
            return base;
        }
        match self.spec.kind {
            SynthKind::ComparabilityViolation if t == 2 => self.p.gamma * base,
            SynthKind::NoEffect => base + no_effect_term(t),
            _ => base,
        }
    }

    fn stationary(&self, arm_mean_shift: f64, rng: &mut RandomStream, out: &mut Vec<f64>) {
        for (m, s) in self.p.mu.iter().zip(&self.p.sigma) {
            out.push(m + arm_mean_shift + s * rng.normal());
        }
    }

    fn draw_continuous(&self, arm: u8, rng: &mut RandomStream) -> UnitDraw {
        let (t_total, d, l) = (self.spec.t_total, self.spec.kind.d(), self.spec.observational_periods);
        let treated = self.treated_effective(arm);
        let decays = treated && self.spec.kind != SynthKind::NoEffect;
        // status-quo mean shift for this unit's arm
        let shift = if arm == 1 && !self.spec.null_arms { 0.0 } else { self.p.control_shift };
        let mut pre_s = Vec::with_capacity(l * d);
        for _ in 0..l {
            self.stationary(shift, rng, &mut pre_s);
        }
        let mut s = Vec::with_capacity((t_total + 1) * d);
        self.stationary(shift, rng, &mut s);
        for t in 1..=t_total {
            if decays {
                for k in 0..d {
                    let v = self.p.decay[k] * s[(t - 1) * d + k];
                    s.push(v);
                }
            } else {
                self.stationary(shift, rng, &mut s);
            }
        }
        // Y at −L+k+1 is driven by S at −L+k
        let pre_y = pre_s.chunks(d).map(|row| self.base_outcome(row)).collect();
        let y = (1..=t_total).map(|t| self.outcome(t, &s[(t - 1) * d..t * d], treated)).collect();
        UnitDraw { s, y, pre_s, pre_y }
    }

    fn draw_markov(&self, arm: u8, rng: &mut RandomStream) -> UnitDraw {
        let m = &self.spec.markov;
        let (t_total, l) = (self.spec.t_total, self.spec.observational_periods);
        let law = if self.treated_effective(arm) { m.treated } else { m.control };
        let u = rng.uniform();
        let mut state = if u < m.initial[0] {
            0.0
        } else if u < m.initial[0] + m.initial[1] {
            1.0
        } else {
            2.0
        };
        let step = |s: f64, stay: f64, rng: &mut RandomStream| if rng.uniform() < stay { s } else { rng.below(3) as f64 };
        let mut pre_s = Vec::with_capacity(l);
        let mut pre_y = Vec::with_capacity(l);
        for _ in 0..l {
            pre_s.push(state);
            pre_y.push(m.control.intercept + m.control.slope * state + m.noise_sd * rng.normal());
            state = step(state, m.control.stay, rng);
        }
        let mut s = Vec::with_capacity(t_total + 1);
        let mut y = Vec::with_capacity(t_total);
        s.push(state);
        for _ in 0..t_total {
            let prev = *s.last().unwrap();
            y.push(law.intercept + law.slope * prev + m.noise_sd * rng.normal());
            let next = step(prev, law.stay, rng);
            s.push(next);
        }
        UnitDraw { s, y, pre_s, pre_y }
    }

    fn draw(&self, arm: u8, rng: &mut RandomStream) -> UnitDraw {
        match self.spec.kind {
            SynthKind::DiscreteMarkov => self.draw_markov(arm, rng),
            _ => self.draw_continuous(arm, rng),
        }
    }
}

/// Treated-only additive term of the no-effect kind for outcome period t.
pub fn no_effect_term(t: usize) -> f64 {
    let sign = if (t - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / ((t + 1) as f64).powi(3)
}

/// Closed-form τ_t for t = 1..=T.
pub fn analytic_truth(spec: &SynthSpec, p: &StructuralParams) -> Vec<f64> {
    let t_total = spec.t_total;
    if spec.null_arms {
        return vec![0.0; t_total];
    }
    (1..=t_total)
        .map(|t| {
            let k = (t - 1) as i32;
            match spec.kind {
                SynthKind::Stabilized1 | SynthKind::Stabilized2 | SynthKind::ComparabilityViolation => {
                    let g = if spec.kind == SynthKind::ComparabilityViolation && t == 2 { p.gamma } else { 1.0 };
                    let treated: f64 = (0..p.mu.len()).map(|d| p.weights[d] * p.decay[d].powi(k) * p.mu[d]).sum();
                    let control: f64 = (0..p.mu.len()).map(|d| p.weights[d] * (p.mu[d] + p.control_shift)).sum();
                    p.outcome_sign * (g * treated - control)
                }
                SynthKind::Nonlinear => {
                    let (k1, k2) = (p.decay[0].powi(k), p.decay[1].powi(k));
                    let e_t = (k2 * p.mu[1] + k2 * k2 * p.sigma[1] * p.sigma[1] / 2.0).exp();
                    let e_c = (p.mu[1] + p.sigma[1] * p.sigma[1] / 2.0).exp();
                    p.outcome_sign * ((k1 - 1.0) * p.mu[0] + p.theta * (e_t - e_c))
                }
                SynthKind::NoEffect => no_effect_term(t),
                SynthKind::DiscreteMarkov => {
                    let m = &spec.markov;
                    let m0 = markov_mean_at_zero(spec);
                    let mean = |stay: f64| 1.0 + (m0 - 1.0) * stay.powi(k);
                    let (c, tr) = (m.control, m.treated);
                    (tr.intercept + tr.slope * mean(tr.stay)) - (c.intercept + c.slope * mean(c.stay))
                }
            }
        })
        .collect()
}

/// E S_0 for the Markov kind, after any observational periods under the control law.
fn markov_mean_at_zero(spec: &SynthSpec) -> f64 {
    let m = &spec.markov;
    let start = m.initial[1] + 2.0 * m.initial[2];
    1.0 + (start - 1.0) * m.control.stay.powi(spec.observational_periods as i32)
}

fn build_units(spec: &SynthSpec, p: &StructuralParams, base: &RandomStream, n_per_arm: usize) -> Vec<UnitRecord> {
    let gen = Generator { spec, p };
    let n = 2 * n_per_arm;
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = base.substream(c as u64);
            (c * CHUNK..((c + 1) * CHUNK).min(n))
                .map(|i| {
                    let arm = (i % 2) as u8;
                    let u = gen.draw(arm, &mut rng);
                    UnitRecord {
                        pre_surrogates: u.pre_s,
                        pre_outcomes: u.pre_y,
                        ..UnitRecord::new(format!("u{i}"), arm, vec![], u.s, u.y)
                    }
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}

/// Panel plus analytic truth.
pub fn generate(spec: &SynthSpec) -> Result<(PanelDataset, TruthOracle)> {
    spec.validate()?;
    let params = StructuralParams::draw(spec);
    let base = RandomStream::new(spec.seed).substream(1);
    let units = build_units(spec, &params, &base, spec.n_per_arm);
    let d = spec.kind.d();
    let window = ExperimentWindow::new(spec.t_experimental, spec.t_total)?;
    let ds = PanelDataset::new(window, d, 0, ColumnNames::standard(d, 0), units)?;
    let tau = analytic_truth(spec, &params);
    Ok((ds, TruthOracle { tau, method: TruthMethod::AnalyticLimit, mc_se: None, params }))
}

/// Monte-Carlo truth from an independent sample of `mega_n` units per arm that
/// shares the panel's structural parameters. Streams in chunks; nothing is stored.
pub fn truth(spec: &SynthSpec, mega_n: usize) -> Result<TruthOracle> {
    spec.validate()?;
    if mega_n < 2 {
        return Err(Error::arg("synthgen", "mega_n must be at least 2"));
    }
    let params = StructuralParams::draw(spec);
    let gen = Generator { spec, p: &params };
    let base = RandomStream::new(spec.seed).substream(TRUTH_STREAM);
    let t_total = spec.t_total;
    let n = 2 * mega_n;
    let chunks = n.div_ceil(CHUNK);
    // per chunk: [arm][t] (sum, sum of squares)
    let partial: Vec<Vec<[f64; 4]>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = base.substream(c as u64);
            let mut acc = vec![[0.0; 4]; t_total];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let arm = i % 2;
                let u = gen.draw(arm as u8, &mut rng);
                for (t, y) in u.y.iter().enumerate() {
                    acc[t][2 * arm] += y;
                    acc[t][2 * arm + 1] += y * y;
                }
            }
            acc
        })
        .collect();
    let m = mega_n as f64;
    let mut tau = Vec::with_capacity(t_total);
    let mut se = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let mut tot = [0.0; 4];
        for part in &partial {
            for k in 0..4 {
                tot[k] += part[t][k];
            }
        }
        let mean = |a: usize| tot[2 * a] / m;
        let var = |a: usize| ((tot[2 * a + 1] - m * mean(a) * mean(a)) / (m - 1.0)).max(0.0);
        tau.push(mean(1) - mean(0));
        se.push((var(1) / m + var(0) / m).sqrt());
    }
    Ok(TruthOracle { tau, method: TruthMethod::MonteCarlo, mc_se: Some(se), params })
}

/// Sidecar describing a generated panel.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar<'a> {
    pub spec: &'a SynthSpec,
    pub params: &'a StructuralParams,
    pub truth: &'a [f64],
    pub truth_method: TruthMethod,
    pub rng: &'static str,
}

pub fn write_sidecar(path: &std::path::Path, spec: &SynthSpec, oracle: &TruthOracle) -> Result<()> {
    let side = Sidecar {
        spec,
        params: &oracle.params,
        truth: &oracle.tau,
        truth_method: oracle.method,
        rng: crate::numerics::rng::ALGORITHM,
    };
    let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests;
