//! Deterministic regression solvers, test statistics and the seeded random stream.

pub mod enet;
pub mod htest;
pub mod ols;
pub mod rng;
pub mod special;

pub use enet::{elastic_net_fit, tune_elastic_net, TunedElasticNet};
pub use htest::{chi_square_gof, coefficient_t_test, welch_t_test, TestResult};
pub use ols::{ols_fit, ridge_fit_multi, LinearFit, Matrix, QrSolver};
pub use rng::RandomStream;

/// Type-7 (linear interpolation) quantile of an ascending, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
