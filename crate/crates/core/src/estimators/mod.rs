//! Effect estimators.
//!
//! Every estimator reads the panel through [`crate::panel::Observed`], so data
//! after T_E cannot influence any output. Trajectories report the observed
//! difference in means for periods 1..=T_E and extrapolations afterwards.

pub mod additive;
pub mod baselines;
pub mod binning;
pub mod discrete;
pub mod knn;
pub mod lsm;
pub mod metrics;
pub mod trajectory;

pub use additive::{estimate_linear_additive, AdditiveEstimate, AdditiveOptions};
pub use baselines::{estimate_ceb, estimate_var};
pub use binning::Binning;
pub use discrete::{estimate_longitudinal_discrete, DiscreteEstimate, DiscreteKernel, DiscreteOptions, ZeroSupportPolicy};
pub use knn::estimate_knn;
pub use lsm::{
    estimate_lsm, fit_linear_surrogate, forecast_linear_surrogate, LaggedDesign, LsmOptions, Regularization,
    SurrogateModelSet,
};
pub use metrics::{compute_metrics, Metrics};
pub use trajectory::{EffectTrajectory, Provenance, TrajectoryPoint};

use crate::error::Result;
use crate::panel::PanelDataset;
use serde::{Deserialize, Serialize};

/// Estimator choice plus options; the common currency of inference and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Ceb,
    Var,
    Lsm(LsmOptions),
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Discrete(DiscreteOptions),
}

fn default_k() -> usize {
    knn::DEFAULT_K
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Ceb => "ceb",
            EstimatorSpec::Var => "var",
            EstimatorSpec::Lsm(_) => "lsm",
            EstimatorSpec::Knn { .. } => "knn",
            EstimatorSpec::Discrete(_) => "discrete",
        }
    }

    /// Runs the estimator. `seed` drives the VAR variable draw and discrete MC.
    pub fn run(&self, ds: &PanelDataset, seed: u64) -> Result<EffectTrajectory> {
        match self {
            EstimatorSpec::Ceb => estimate_ceb(ds),
            EstimatorSpec::Var => estimate_var(ds, seed),
            EstimatorSpec::Lsm(o) => estimate_lsm(ds, o),
            EstimatorSpec::Knn { k } => estimate_knn(ds, *k),
            EstimatorSpec::Discrete(o) => estimate_longitudinal_discrete(ds, o, seed).map(|e| e.trajectory),
        }
    }
}
