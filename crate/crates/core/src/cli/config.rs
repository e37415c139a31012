//! Run configuration (TOML).
//!
//! ```toml
//! seed = 7
//! out = "out"
//!
//! [data]                      # exactly one of `path` / `synth`
//! path = "panel.csv"
//! sidecar = "panel.json"      # optional truth from `simulate`
//! pre_periods = 0
//!
//! [window]                    # required with `path`; overrides the synth window
//! t_experimental = 3
//! t_total = 10
//!
//! [[estimators]]
//! name = "lsm"                # ceb | var | lsm | knn | discrete
//!
//! [inference]
//! method = "subsample_bootstrap"
//! replicas = 100
//!
//! [validation]
//! comparability = [{ t = 2, t_prime = 3, delta = 1 }]
//!
//! [bench]
//! t_experimental = [2, 3, 4]
//! seeds = 20
//! ```

use crate::error::{Error, Result};
use crate::estimators::{AdditiveOptions, EstimatorSpec, LsmOptions};
use crate::panel::ExperimentWindow;
use crate::synthgen::SynthSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub window: Option<WindowConfig>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub additive: Option<AdditiveOptions>,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

fn default_estimators() -> Vec<EstimatorSpec> {
    vec![EstimatorSpec::Lsm(LsmOptions::default())]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    pub pre_periods: Option<usize>,
    pub synth: Option<SynthSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub t_experimental: usize,
    pub t_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMethod {
    None,
    Permutation,
    RandomizationBootstrap,
    SubsampleBootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub method: InferenceMethod,
    pub replicas: usize,
    pub fraction: f64,
    pub level: f64,
    /// Permutation statistic period; defaults to T.
    pub period: Option<usize>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { method: InferenceMethod::None, replicas: 100, fraction: 0.5, level: 0.95, period: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodPair {
    pub t: usize,
    pub t_prime: usize,
    pub delta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub n_bins: usize,
    pub use_covariates: bool,
    /// Rejection level of the parallel-trends test.
    pub level: f64,
    pub comparability: Vec<PeriodPair>,
    pub parallel_trends: Vec<PeriodPair>,
    pub theta_grid: Vec<f64>,
    pub subsets: Vec<Vec<usize>>,
    /// Expected treated share for the sample-ratio check.
    pub treated_fraction: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            n_bins: 5,
            use_covariates: true,
            level: 0.05,
            comparability: vec![],
            parallel_trends: vec![],
            theta_grid: vec![],
            subsets: vec![],
            treated_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub t_experimental: Vec<usize>,
    /// Panels per T_E, with seeds `seed, seed+1, …`.
    pub seeds: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { t_experimental: vec![2, 3, 4], seeds: 20 }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks the invariants that do not need the data. Relative paths are
    /// resolved against `base`.
    pub fn validate(&mut self, base: &Path) -> Result<()> {
        if self.seed.is_none() {
            return Err(Error::Config("seed is required".into()));
        }
        match (&self.data.path, &self.data.synth) {
            (Some(_), Some(_)) => return Err(Error::Config("data: give either `path` or `synth`, not both".into())),
            (None, None) => return Err(Error::Config("data: one of `path` or `synth` is required".into())),
            (Some(_), None) if self.window.is_none() => {
                return Err(Error::Config("window is required when reading a panel file".into()))
            }
            _ => {}
        }
        if let Some(w) = self.window {
            ExperimentWindow::new(w.t_experimental, w.t_total)?;
            if let Some(s) = &mut self.data.synth {
                s.t_experimental = w.t_experimental;
                s.t_total = w.t_total;
            }
        }
        if let Some(s) = &self.data.synth {
            s.validate()?;
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("at least one estimator is required".into()));
        }
        let inf = &self.inference;
        if inf.method != InferenceMethod::None && inf.replicas == 0 {
            return Err(Error::Config("inference.replicas must be at least 1".into()));
        }
        for p in [&mut self.data.path, &mut self.data.sidecar].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }
}
