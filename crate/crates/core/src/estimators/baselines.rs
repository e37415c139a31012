//! Constant extrapolation (CEB) and vector autoregression (VAR) baselines.

use super::lsm::RIDGE_FALLBACK;
use super::trajectory::EffectTrajectory;
use crate::error::{Error, Result};
use crate::numerics::{LinearFit, Matrix, QrSolver, RandomStream};
use crate::panel::{observed_effects, PanelDataset};

/// Future effects equal the mean observed effect.
pub fn estimate_ceb(ds: &PanelDataset) -> Result<EffectTrajectory> {
    let w = ds.window();
    let observed = observed_effects(ds, w.t_experimental())?;
    let mean = observed.iter().map(|p| p.estimate).sum::<f64>() / observed.len() as f64;
    Ok(EffectTrajectory::from_parts("ceb", "ceb".into(), observed, &vec![mean; w.t_future()]))
}

/// Variables entering the VAR: index 0 is the outcome, k ≥ 1 is surrogate k−1.
/// With lag order p < V only the outcome and p−1 surrogates drawn from `rng` are kept.
pub fn var_variables(d: usize, p: usize, rng: &mut RandomStream) -> Vec<usize> {
    let v = d + 1;
    if p >= v {
        return (0..v).collect();
    }
    let mut picked = rng.choose_distinct(d, p.saturating_sub(1));
    picked.sort_unstable();
    std::iter::once(0).chain(picked.into_iter().map(|k| k + 1)).collect()
}

/// Ridge on `[1 | X]` with the constant penalized like any other column, solved
/// in the n×n dual. As λ → 0 this is the minimum-norm least-squares solution,
/// which keeps underdetermined VAR fits bounded.
fn dual_ridge_fit(lagged: &Matrix, targets: &[Vec<f64>], lambda: f64) -> Result<Vec<LinearFit>> {
    let n = lagged.rows();
    let aug = |i: usize| std::iter::once(1.0).chain(lagged.row(i).iter().copied());
    let mut gram = vec![vec![0.0; n]; n];
    for (i, gi) in gram.iter_mut().enumerate() {
        for (j, g) in gi.iter_mut().enumerate() {
            *g = aug(i).zip(aug(j)).map(|(a, b)| a * b).sum();
        }
    }
    let scale = (0..n).map(|i| gram[i][i]).sum::<f64>() / n as f64;
    for (i, gi) in gram.iter_mut().enumerate() {
        gi[i] += lambda * scale.max(f64::MIN_POSITIVE);
    }
    targets
        .iter()
        .map(|y| {
            let a = solve_dense(gram.clone(), y.clone())?;
            let mut beta = vec![0.0; lagged.cols() + 1];
            for (i, ai) in a.iter().enumerate() {
                for (b, z) in beta.iter_mut().zip(aug(i)) {
                    *b += ai * z;
                }
            }
            let mut fit = LinearFit::constant(lagged.cols(), beta[0], n);
            fit.coefficients = beta[1..].to_vec();
            Ok(fit)
        })
        .collect()
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap_or(c);
        if a[piv][c].abs() <= f64::MIN_POSITIVE {
            return Err(Error::Singular { columns: vec![c] });
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        x[c] = (b[c] - (c + 1..n).map(|k| a[c][k] * x[k]).sum::<f64>()) / a[c][c];
    }
    Ok(x)
}

fn fit_equations(lagged: &Matrix, targets: &[Vec<f64>]) -> Result<Vec<LinearFit>> {
    if lagged.rows() > lagged.cols() {
        match QrSolver::new(lagged, None) {
            Ok(qr) => return targets.iter().map(|y| qr.fit(y)).collect(),
            Err(Error::Singular { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    log::warn!(
        "estimators: VAR design with {} rows and {} columns is singular; ridge fallback {RIDGE_FALLBACK}",
        lagged.rows(),
        lagged.cols()
    );
    dual_ridge_fit(lagged, targets, RIDGE_FALLBACK)
}

/// Forecast of the arm-mean outcome for periods T_E+1..=T.
fn var_arm_forecast(series: &[Vec<f64>], p: usize, steps: usize) -> Result<Vec<f64>> {
    let te = series.len();
    let k = series[0].len();
    let rows: Vec<Vec<f64>> = (p..te)
        .map(|t| (1..=p).flat_map(|lag| series[t - lag].iter().copied()).collect())
        .collect();
    let lagged = Matrix::from_rows(&rows);
    let targets: Vec<Vec<f64>> = (0..k).map(|j| (p..te).map(|t| series[t][j]).collect()).collect();
    let fits = fit_equations(&lagged, &targets)?;
    let mut hist: Vec<Vec<f64>> = series.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let t = hist.len();
        let x: Vec<f64> = (1..=p).flat_map(|lag| hist[t - lag].iter().copied()).collect();
        let next: Vec<f64> = fits.iter().map(|f| f.predict(&x)).collect();
        out.push(next[0]);
        hist.push(next);
    }
    Ok(out)
}

/// VAR(T_E − 2) on per-arm series of arm means; T_E = 2 falls back to CEB.
pub fn estimate_var(ds: &PanelDataset, seed: u64) -> Result<EffectTrajectory> {
    let obs = ds.observed();
    let te = obs.t_experimental();
    if te == 2 {
        let mut tr = estimate_ceb(ds)?;
        tr.estimator = "var".into();
        tr.options_fingerprint = "var(p=0,ceb)".into();
        return Ok(tr);
    }
    let p = te - 2;
    let mut rng = RandomStream::new(seed).substream(0x0076_6172);
    let vars = var_variables(obs.d(), p, &mut rng);
    let steps = obs.t_total() - te;
    let mut forecasts = Vec::with_capacity(2);
    for arm in [0u8, 1] {
        let idx = obs.arm_indices(arm);
        let n = idx.len() as f64;
        let series: Vec<Vec<f64>> = (1..=te)
            .map(|t| {
                vars.iter()
                    .map(|&v| {
                        idx.iter()
                            .map(|&i| if v == 0 { obs.y(i, t) } else { obs.s(i, t, v - 1) })
                            .sum::<f64>()
                            / n
                    })
                    .collect()
            })
            .collect();
        forecasts.push(var_arm_forecast(&series, p, steps)?);
    }
    let future: Vec<f64> = (0..steps).map(|k| forecasts[1][k] - forecasts[0][k]).collect();
    let observed = observed_effects(ds, te)?;
    let fp = format!("var(p={p},variables={vars:?},seed={seed})");
    Ok(EffectTrajectory::from_parts("var", fp, observed, &future))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::testutil::tiny;

    #[test]
    fn ceb_is_mean_of_observed() {
        let ds = tiny(6, 4, 2, 1, 0.0);
        let tr = estimate_ceb(&ds).unwrap();
        let m = (tr.at(1) + tr.at(2)) / 2.0;
        assert_eq!(tr.at(3), m);
        assert_eq!(tr.at(4), m);
    }

    #[test]
    fn var_with_two_periods_is_ceb() {
        let ds = tiny(6, 5, 2, 2, 0.3);
        assert_eq!(estimate_var(&ds, 1).unwrap().estimates(), estimate_ceb(&ds).unwrap().estimates());
    }

    #[test]
    fn constant_series_stay_constant() {
        let series = vec![vec![2.0, 1.0]; 5];
        let f = var_arm_forecast(&series, 2, 4).unwrap();
        for v in f {
            assert!((v - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn exact_ar1_is_continued() {
        // y_t = 1 + 0.5 y_{t−1}: two transitions identify it exactly
        let series: Vec<Vec<f64>> = [4.0, 3.0, 2.5].iter().map(|&v| vec![v]).collect();
        let f = var_arm_forecast(&series, 1, 2).unwrap();
        assert!((f[0] - 2.25).abs() < 1e-10);
        assert!((f[1] - 2.125).abs() < 1e-10);
    }

    #[test]
    fn variable_subset_keeps_outcome() {
        let mut rng = RandomStream::new(3);
        let v = var_variables(4, 2, &mut rng);
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], 0);
        assert_eq!(var_variables(4, 5, &mut rng), vec![0, 1, 2, 3, 4]);
    }
}
