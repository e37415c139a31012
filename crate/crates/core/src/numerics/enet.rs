//! Elastic net by cyclic coordinate descent on standardized columns.
//!
//! Objective on the standardized scale:
//! (1/2N)‖y − ȳ − Zβ‖² + λ(α‖β‖₁ + (1−α)/2 ‖β‖²), intercept unpenalized.

use super::ols::{LinearFit, Matrix};
use crate::error::{Error, Result};
use serde::Serialize;

pub const DEFAULT_TOLERANCE: f64 = 1e-7;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy)]
pub struct ElasticNetOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for ElasticNetOptions {
    fn default() -> Self {
        ElasticNetOptions { tolerance: DEFAULT_TOLERANCE, max_sweeps: DEFAULT_MAX_SWEEPS }
    }
}

struct Standardized {
    n: usize,
    means: Vec<f64>,
    scales: Vec<f64>,
    z: Vec<Vec<f64>>,
    y_mean: f64,
    yc: Vec<f64>,
}

fn standardize(design: &Matrix, target: &[f64], rows: &[usize]) -> Standardized {
    let n = rows.len();
    let p = design.cols();
    let nf = n as f64;
    let mut means = vec![0.0; p];
    for &i in rows {
        for (m, v) in means.iter_mut().zip(design.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= nf);
    let mut z = vec![vec![0.0; n]; p];
    let mut scales = vec![0.0; p];
    for j in 0..p {
        for (k, &i) in rows.iter().enumerate() {
            z[j][k] = design.get(i, j) - means[j];
        }
        let ss: f64 = z[j].iter().map(|v| v * v).sum::<f64>() / nf;
        let s = ss.sqrt();
        scales[j] = s;
        if s > 0.0 {
            z[j].iter_mut().for_each(|v| *v /= s);
        }
    }
    let y_mean = rows.iter().map(|&i| target[i]).sum::<f64>() / nf;
    let yc = rows.iter().map(|&i| target[i] - y_mean).collect();
    Standardized { n, means, scales, z, y_mean, yc }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn objective(st: &Standardized, resid: &[f64], beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    rss / (2.0 * st.n as f64) + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
}

/// Runs coordinate descent from `beta` (standardized scale) in place.
fn descend(
    st: &Standardized,
    beta: &mut [f64],
    lambda: f64,
    alpha: f64,
    opts: ElasticNetOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<usize> {
    let nf = st.n as f64;
    let mut resid = st.yc.clone();
    for (j, b) in beta.iter().enumerate() {
        if *b != 0.0 {
            for (r, z) in resid.iter_mut().zip(&st.z[j]) {
                *r -= z * b;
            }
        }
    }
    if let Some(t) = trace.as_deref_mut() {
        t.push(objective(st, &resid, beta, lambda, alpha));
    }
    let thresh = lambda * alpha;
    let denom = 1.0 + lambda * (1.0 - alpha);
    for sweep in 1..=opts.max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..beta.len() {
            if st.scales[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let zj = &st.z[j];
            let rho: f64 = zj.iter().zip(&resid).map(|(z, r)| z * r).sum::<f64>() / nf + beta[j];
            let new = soft_threshold(rho, thresh) / denom;
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, z) in resid.iter_mut().zip(zj) {
                    *r -= z * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(st, &resid, beta, lambda, alpha));
        }
        let scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
        if max_delta <= opts.tolerance * scale {
            return Ok(sweep);
        }
    }
    Err(Error::Convergence { iterations: opts.max_sweeps })
}

fn to_fit(st: &Standardized, beta: &[f64], design: &Matrix, target: &[f64], rows: &[usize]) -> LinearFit {
    let coefficients: Vec<f64> = beta
        .iter()
        .zip(&st.scales)
        .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = st.y_mean - coefficients.iter().zip(&st.means).map(|(b, m)| b * m).sum::<f64>();
    let mut fit = LinearFit {
        intercept,
        coefficients,
        coefficient_standard_errors: None,
        intercept_standard_error: None,
        residual_variance: 0.0,
        n_observations: st.n,
        df_residual: 0.0,
    };
    let rss: f64 = rows.iter().map(|&i| (target[i] - fit.predict(design.row(i))).powi(2)).sum();
    let active = beta.iter().filter(|b| **b != 0.0).count();
    let df = st.n as f64 - active as f64 - 1.0;
    fit.df_residual = df;
    fit.residual_variance = if df > 0.0 { rss / df } else { 0.0 };
    fit
}

fn check_args(design: &Matrix, target: &[f64], penalty_weight: f64, l1_ratio: f64) -> Result<()> {
    if design.rows() != target.len() {
        return Err(Error::arg("numerics", "target length differs from design rows"));
    }
    if design.rows() == 0 {
        return Err(Error::arg("numerics", "elastic net needs at least one row"));
    }
    if !(penalty_weight >= 0.0) {
        return Err(Error::arg("numerics", "penalty_weight must be >= 0"));
    }
    if !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::arg("numerics", "l1_ratio must lie in [0, 1]"));
    }
    Ok(())
}

/// Elastic-net fit with default tolerance and sweep cap.
pub fn elastic_net_fit(design: &Matrix, target: &[f64], penalty_weight: f64, l1_ratio: f64) -> Result<LinearFit> {
    elastic_net_fit_with(design, target, penalty_weight, l1_ratio, ElasticNetOptions::default())
}

pub fn elastic_net_fit_with(
    design: &Matrix,
    target: &[f64],
    penalty_weight: f64,
    l1_ratio: f64,
    opts: ElasticNetOptions,
) -> Result<LinearFit> {
    elastic_net_trace(design, target, penalty_weight, l1_ratio, opts).map(|(f, _)| f)
}

/// Fit plus the objective value before the first sweep and after every sweep.
pub fn elastic_net_trace(
    design: &Matrix,
    target: &[f64],
    penalty_weight: f64,
    l1_ratio: f64,
    opts: ElasticNetOptions,
) -> Result<(LinearFit, Vec<f64>)> {
    check_args(design, target, penalty_weight, l1_ratio)?;
    let rows: Vec<usize> = (0..design.rows()).collect();
    let st = standardize(design, target, &rows);
    let mut beta = vec![0.0; design.cols()];
    let mut trace = Vec::new();
    descend(&st, &mut beta, penalty_weight, l1_ratio, opts, Some(&mut trace))?;
    Ok((to_fit(&st, &beta, design, target, &rows), trace))
}

#[derive(Debug, Clone, Serialize)]
pub struct TunedElasticNet {
    pub penalty_weight: f64,
    pub l1_ratio: f64,
    pub cv_mse: f64,
    pub fit: LinearFit,
}

/// `grid_size` evenly spaced points on [0, 1] for both hyperparameters, `folds`-fold
/// cross-validation with interleaved folds (row i belongs to fold i mod folds).
pub fn tune_elastic_net(design: &Matrix, target: &[f64], grid_size: usize, folds: usize) -> Result<TunedElasticNet> {
    let n = design.rows();
    if grid_size < 2 {
        return Err(Error::arg("numerics", "grid_size must be >= 2"));
    }
    if folds < 2 {
        return Err(Error::arg("numerics", "folds must be >= 2"));
    }
    if n < folds {
        return Err(Error::arg("numerics", format!("N={n} is smaller than folds={folds}")));
    }
    check_args(design, target, 0.0, 0.0)?;
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 / (grid_size - 1) as f64).collect();
    let opts = ElasticNetOptions::default();
    // sse[a][l] summed over folds; NaN marks a failed fit
    let mut sse = vec![vec![0.0f64; grid_size]; grid_size];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
        let st = standardize(design, target, &train);
        for (ai, &alpha) in grid.iter().enumerate() {
            let mut beta = vec![0.0; design.cols()];
            for li in (0..grid_size).rev() {
                let lambda = grid[li];
                match descend(&st, &mut beta, lambda, alpha, opts, None) {
                    Ok(_) => {
                        let fit = to_fit(&st, &beta, design, target, &train);
                        let e: f64 = test.iter().map(|&i| (target[i] - fit.predict(design.row(i))).powi(2)).sum();
                        sse[ai][li] += e;
                    }
                    Err(_) => {
                        sse[ai][li] = f64::NAN;
                        beta.iter_mut().for_each(|b| *b = 0.0);
                    }
                }
            }
        }
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for ai in 0..grid_size {
        for li in 0..grid_size {
            let e = sse[ai][li];
            if e.is_finite() && best.is_none_or(|(_, _, b)| e < b) {
                best = Some((ai, li, e));
            }
        }
    }
    let (ai, li, e) = best.ok_or(Error::Convergence { iterations: opts.max_sweeps })?;
    let fit = elastic_net_fit_with(design, target, grid[li], grid[ai], opts)?;
    Ok(TunedElasticNet { penalty_weight: grid[li], l1_ratio: grid[ai], cv_mse: e / n as f64, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ols::ols_fit;
    use crate::numerics::rng::RandomStream;

    fn gaussian_design(rng: &mut RandomStream, n: usize, p: usize) -> Matrix {
        let mut x = Matrix::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                x.set(i, j, rng.normal());
            }
        }
        x
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let mut rng = RandomStream::new(3);
        let x = gaussian_design(&mut rng, 60, 4);
        let y: Vec<f64> = (0..60).map(|i| 1.0 + x.get(i, 0) - 2.0 * x.get(i, 2) + 0.3 * rng.normal()).collect();
        let o = ols_fit(&x, &y, None).unwrap();
        let e = elastic_net_fit(&x, &y, 0.0, 0.5).unwrap();
        assert!((o.intercept - e.intercept).abs() < 1e-6);
        for j in 0..4 {
            assert!((o.coefficients[j] - e.coefficients[j]).abs() < 1e-6);
        }
        assert!(e.coefficient_standard_errors.is_none());
    }

    #[test]
    fn huge_penalty_shrinks_everything() {
        let mut rng = RandomStream::new(4);
        let x = gaussian_design(&mut rng, 30, 3);
        let y: Vec<f64> = (0..30).map(|i| 2.0 + x.get(i, 1)).collect();
        let e = elastic_net_fit(&x, &y, 1e9, 0.7).unwrap();
        assert!(e.coefficients.iter().all(|b| b.abs() < 1e-8));
        let ybar = y.iter().sum::<f64>() / 30.0;
        assert!((e.intercept - ybar).abs() < 1e-8);
    }

    #[test]
    fn lasso_recovers_sparse_support() {
        let mut rng = RandomStream::new(5);
        let (n, p) = (200, 20);
        let x = gaussian_design(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|i| 3.0 * x.get(i, 2) - 2.0 * x.get(i, 11) + 0.5 * rng.normal()).collect();
        let e = elastic_net_fit(&x, &y, 0.2, 1.0).unwrap();
        for j in 0..p {
            if j == 2 || j == 11 {
                assert!(e.coefficients[j].abs() > 1.0);
            } else {
                assert_eq!(e.coefficients[j], 0.0, "j={j}");
            }
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = RandomStream::new(6);
        let x = gaussian_design(&mut rng, 50, 8);
        let y: Vec<f64> = (0..50).map(|i| x.get(i, 0) + rng.normal()).collect();
        let (_, trace) = elastic_net_trace(&x, &y, 0.05, 0.3, ElasticNetOptions::default()).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn sweep_cap_reports_iterations() {
        let mut rng = RandomStream::new(8);
        let x = gaussian_design(&mut rng, 40, 6);
        let y: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
        let opts = ElasticNetOptions { tolerance: 0.0, max_sweeps: 3 };
        match elastic_net_fit_with(&x, &y, 0.0, 0.5, opts) {
            Err(Error::Convergence { iterations }) => assert_eq!(iterations, 3),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn tuning_on_noise_is_calibrated() {
        let mut rng = RandomStream::new(10);
        let x = gaussian_design(&mut rng, 100, 5);
        let y: Vec<f64> = (0..100).map(|_| rng.normal()).collect();
        let t = tune_elastic_net(&x, &y, 20, 5).unwrap();
        let m = y.iter().sum::<f64>() / 100.0;
        let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 100.0;
        assert!((t.cv_mse - var).abs() <= 0.1 * var, "cv {} var {}", t.cv_mse, var);
    }

    #[test]
    fn tuning_on_clean_signal_picks_small_penalty() {
        let mut rng = RandomStream::new(11);
        let x = gaussian_design(&mut rng, 80, 4);
        let y: Vec<f64> = (0..80).map(|i| 2.0 * x.get(i, 0) - x.get(i, 3)).collect();
        let t = tune_elastic_net(&x, &y, 100, 5).unwrap();
        assert!(t.penalty_weight < 0.1, "penalty {}", t.penalty_weight);
    }

    #[test]
    fn leave_one_out_completes() {
        let mut rng = RandomStream::new(12);
        let x = gaussian_design(&mut rng, 10, 2);
        let y: Vec<f64> = (0..10).map(|i| x.get(i, 0) + 0.1 * rng.normal()).collect();
        let t = tune_elastic_net(&x, &y, 5, 10).unwrap();
        assert_eq!(t.fit.coefficients.len(), 2);
        assert!(matches!(tune_elastic_net(&x, &y, 5, 11), Err(Error::Argument { .. })));
    }
}
