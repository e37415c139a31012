//! Linear surrogate model: per-arm lag-stacked regressions iterated forward.
//!
//! The outcome is treated as one of the stacked variables, so each period
//! contributes V = 1 + D values `(Y, S_1..S_D)`. Features are the V variables at
//! periods 1..T_E−1 (optionally followed by the covariates); targets are the V
//! variables at T_E. Row 0 of the target block is the surrogate index ĥ, rows
//! 1..=D are the pivot indices ĝ.

use super::trajectory::EffectTrajectory;
use crate::error::{Error, Result};
use crate::numerics::{elastic_net_fit, ridge_fit_multi, tune_elastic_net, LinearFit, Matrix, QrSolver};
use crate::panel::{observed_effects, Observed, PanelDataset};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative ridge used when the lag-stacked design is singular.
pub const RIDGE_FALLBACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Regularization {
    None,
    ElasticNet { penalty_weight: f64, l1_ratio: f64 },
    ElasticNetTuned { grid_size: usize, folds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LsmOptions {
    pub use_covariates: bool,
    pub regularization: Regularization,
    /// Fixed elastic net used when an arm has no more units than features.
    pub forced_penalty_weight: f64,
    pub forced_l1_ratio: f64,
}

impl Default for LsmOptions {
    fn default() -> Self {
        LsmOptions {
            use_covariates: false,
            regularization: Regularization::None,
            forced_penalty_weight: 0.01,
            forced_l1_ratio: 0.5,
        }
    }
}

impl LsmOptions {
    pub fn fingerprint(&self) -> String {
        let reg = match self.regularization {
            Regularization::None => "none".to_string(),
            Regularization::ElasticNet { penalty_weight, l1_ratio } => format!("enet({penalty_weight},{l1_ratio})"),
            Regularization::ElasticNetTuned { grid_size, folds } => format!("enet_cv({grid_size},{folds})"),
        };
        format!("lsm(covariates={},regularization={reg})", self.use_covariates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Ols,
    RidgeFallback,
    ElasticNet,
    ElasticNetTuned,
    ForcedElasticNet,
}

/// Lag-stacked design for one arm.
#[derive(Debug, Clone)]
pub struct LaggedDesign {
    pub units: Vec<usize>,
    pub features: Matrix,
    /// `targets[v]` holds variable v at T_E for every row.
    pub targets: Vec<Vec<f64>>,
}

/// (Y, S_1..S_D) at period t.
fn stacked(obs: &Observed<'_>, i: usize, t: usize, out: &mut Vec<f64>) {
    out.push(obs.y(i, t));
    out.extend_from_slice(obs.s_row(i, t));
}

impl LaggedDesign {
    pub fn build(obs: &Observed<'_>, arm: u8, use_covariates: bool) -> LaggedDesign {
        let te = obs.t_experimental();
        let v = 1 + obs.d();
        let units = obs.arm_indices(arm);
        let width = feature_width(obs, use_covariates);
        let mut data = Vec::with_capacity(units.len() * width);
        let mut targets = vec![Vec::with_capacity(units.len()); v];
        let mut row = Vec::with_capacity(width);
        for &i in &units {
            row.clear();
            for t in 1..te {
                stacked(obs, i, t, &mut row);
            }
            if use_covariates {
                row.extend_from_slice(obs.x(i));
            }
            data.extend_from_slice(&row);
            targets[0].push(obs.y(i, te));
            for d in 0..obs.d() {
                targets[d + 1].push(obs.s(i, te, d));
            }
        }
        LaggedDesign { features: Matrix::from_row_major(units.len(), width, data), units, targets }
    }
}

pub fn feature_width(obs: &Observed<'_>, use_covariates: bool) -> usize {
    (1 + obs.d()) * (obs.t_experimental() - 1) + if use_covariates { obs.r() } else { 0 }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmModels {
    pub arm: u8,
    pub method: FitMethod,
    /// `fits[0]` is ĥ (outcome), `fits[d]` is ĝ_d for surrogate d.
    pub fits: Vec<LinearFit>,
}

impl ArmModels {
    pub fn surrogate_index(&self) -> &LinearFit {
        &self.fits[0]
    }

    pub fn pivot_indices(&self) -> &[LinearFit] {
        &self.fits[1..]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurrogateModelSet {
    pub t_experimental: usize,
    pub d_surrogates: usize,
    pub r_covariates: usize,
    pub options: LsmOptions,
    /// Index 0 control, 1 treated.
    pub arms: Vec<ArmModels>,
}

fn fit_arm(design: &LaggedDesign, arm: u8, opts: &LsmOptions) -> Result<ArmModels> {
    let n = design.features.rows();
    let width = design.features.cols();
    let x = &design.features;
    let enet = |pw: f64, l1: f64| -> Result<Vec<LinearFit>> {
        design.targets.iter().map(|y| elastic_net_fit(x, y, pw, l1)).collect()
    };
    if n <= width {
        if n < 2 {
            return Err(Error::Estimation(format!("arm {arm} has {n} units; at least 2 are required")));
        }
        log::warn!(
            "estimators: arm {arm} has {n} units for {width} features; forcing elastic net ({}, {})",
            opts.forced_penalty_weight,
            opts.forced_l1_ratio
        );
        let fits = enet(opts.forced_penalty_weight, opts.forced_l1_ratio)?;
        return Ok(ArmModels { arm, method: FitMethod::ForcedElasticNet, fits });
    }
    match opts.regularization {
        Regularization::ElasticNet { penalty_weight, l1_ratio } => {
            Ok(ArmModels { arm, method: FitMethod::ElasticNet, fits: enet(penalty_weight, l1_ratio)? })
        }
        Regularization::ElasticNetTuned { grid_size, folds } => {
            let fits = design
                .targets
                .iter()
                .map(|y| tune_elastic_net(x, y, grid_size, folds).map(|t| t.fit))
                .collect::<Result<_>>()?;
            Ok(ArmModels { arm, method: FitMethod::ElasticNetTuned, fits })
        }
        Regularization::None => match QrSolver::new(x, None) {
            Ok(qr) => {
                let fits = design.targets.iter().map(|y| qr.fit(y)).collect::<Result<_>>()?;
                Ok(ArmModels { arm, method: FitMethod::Ols, fits })
            }
            Err(Error::Singular { columns }) => {
                log::warn!("estimators: arm {arm} design singular in columns {columns:?}; ridge fallback {RIDGE_FALLBACK}");
                let fits = ridge_fit_multi(x, &design.targets, RIDGE_FALLBACK).map_err(|e| match e {
                    Error::Singular { columns } => {
                        Error::Estimation(format!("arm {arm} design remains singular after ridge, columns {columns:?}"))
                    }
                    other => other,
                })?;
                Ok(ArmModels { arm, method: FitMethod::RidgeFallback, fits })
            }
            Err(e) => Err(e),
        },
    }
}

/// Fits ĥ and ĝ separately within each arm.
pub fn fit_linear_surrogate(ds: &PanelDataset, opts: &LsmOptions) -> Result<SurrogateModelSet> {
    let obs = ds.observed();
    let use_cov = opts.use_covariates && obs.r() > 0;
    let arms = [0u8, 1]
        .iter()
        .map(|&arm| fit_arm(&LaggedDesign::build(&obs, arm, use_cov), arm, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurrogateModelSet {
        t_experimental: obs.t_experimental(),
        d_surrogates: obs.d(),
        r_covariates: obs.r(),
        options: LsmOptions { use_covariates: use_cov, ..*opts },
        arms,
    })
}

/// Generic sliding-window forecaster shared by the linear and kNN models.
/// `predict(arm, features)` returns the V next-period values. Returns, per future
/// period, the arm mean of predicted Y for (control, treated).
pub(crate) fn slide_forecast<F>(obs: &Observed<'_>, use_covariates: bool, predict: F) -> Vec<[f64; 2]>
where
    F: Fn(u8, &[f64]) -> Vec<f64> + Sync,
{
    let te = obs.t_experimental();
    let steps = obs.t_total() - te;
    let v = 1 + obs.d();
    let per_arm: Vec<Vec<f64>> = [0u8, 1]
        .iter()
        .map(|&arm| {
            let units = obs.arm_indices(arm);
            let preds: Vec<Vec<f64>> = units
                .par_iter()
                .map(|&i| {
                    let mut window = Vec::with_capacity(v * (te - 1));
                    for t in 2..=te {
                        stacked(obs, i, t, &mut window);
                    }
                    let mut feat = Vec::with_capacity(window.len() + obs.r());
                    let mut ys = Vec::with_capacity(steps);
                    for _ in 0..steps {
                        feat.clear();
                        feat.extend_from_slice(&window);
                        if use_covariates {
                            feat.extend_from_slice(obs.x(i));
                        }
                        let next = predict(arm, &feat);
                        ys.push(next[0]);
                        window.drain(..v);
                        window.extend_from_slice(&next);
                    }
                    ys
                })
                .collect();
            let n = units.len() as f64;
            (0..steps).map(|k| preds.iter().map(|p| p[k]).sum::<f64>() / n).collect()
        })
        .collect();
    (0..steps).map(|k| [per_arm[0][k], per_arm[1][k]]).collect()
}

/// Iterated per-unit forecasts; τ̂_t = treated mean − control mean of predicted Y_t.
pub fn forecast_linear_surrogate(models: &SurrogateModelSet, ds: &PanelDataset) -> Result<EffectTrajectory> {
    let obs = ds.observed();
    if models.t_experimental != obs.t_experimental() || models.d_surrogates != obs.d() {
        return Err(Error::arg("estimators", "models were fitted on a different window or surrogate set"));
    }
    let use_cov = models.options.use_covariates;
    let means = slide_forecast(&obs, use_cov, |arm, feat| {
        models.arms[arm as usize].fits.iter().map(|f| f.predict(feat)).collect()
    });
    let future: Vec<f64> = means.iter().map(|m| m[1] - m[0]).collect();
    let observed = observed_effects(ds, obs.t_experimental())?;
    Ok(EffectTrajectory::from_parts("lsm", models.options.fingerprint(), observed, &future))
}

/// Fit then forecast.
pub fn estimate_lsm(ds: &PanelDataset, opts: &LsmOptions) -> Result<EffectTrajectory> {
    let models = fit_linear_surrogate(ds, opts)?;
    forecast_linear_surrogate(&models, ds)
}
