//! Bias and MSE over the future horizon.

use super::trajectory::EffectTrajectory;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// Mean over future periods of |τ̂_t − τ_t|.
    pub bias: f64,
    /// Mean over future periods of τ̂_t − τ_t.
    pub signed_error: f64,
    /// Mean squared error over replicas × future periods, or the point error without replicas.
    pub mse: f64,
    pub replicas: usize,
}

/// `truth[t-1]` is τ_t for t = 1..=T.
pub fn compute_metrics(est: &EffectTrajectory, truth: &[f64], replicas: Option<&[EffectTrajectory]>) -> Result<Metrics> {
    let t = est.t_total();
    let te = est.t_experimental;
    if truth.len() != t {
        return Err(Error::arg("estimators", format!("truth has {} periods, trajectory has {t}", truth.len())));
    }
    if te >= t {
        return Err(Error::arg("estimators", "trajectory has no future periods"));
    }
    let nf = (t - te) as f64;
    let errs: Vec<f64> = (te + 1..=t).map(|p| est.at(p) - truth[p - 1]).collect();
    let bias = errs.iter().map(|e| e.abs()).sum::<f64>() / nf;
    let signed_error = errs.iter().sum::<f64>() / nf;
    let (mse, n_rep) = match replicas {
        Some(reps) if !reps.is_empty() => {
            let mut acc = 0.0;
            for r in reps {
                if r.t_total() != t || r.t_experimental != te {
                    return Err(Error::arg("estimators", "replica window differs from the estimate"));
                }
                acc += (te + 1..=t).map(|p| (r.at(p) - truth[p - 1]).powi(2)).sum::<f64>();
            }
            (acc / (nf * reps.len() as f64), reps.len())
        }
        _ => (errs.iter().map(|e| e * e).sum::<f64>() / nf, 0),
    };
    Ok(Metrics { bias, signed_error, mse, replicas: n_rep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::trajectory::{Provenance, TrajectoryPoint};

    fn traj(v: &[f64], te: usize) -> EffectTrajectory {
        let obs = (0..te).map(|k| TrajectoryPoint::new(k + 1, v[k], Provenance::Observed)).collect();
        EffectTrajectory::from_parts("x", String::new(), obs, &v[te..])
    }

    #[test]
    fn exact_and_shifted() {
        let truth = [0.1, 0.2, 0.3, 0.4, 0.5];
        let m = compute_metrics(&traj(&truth, 2), &truth, None).unwrap();
        assert_eq!((m.bias, m.mse), (0.0, 0.0));
        let shifted: Vec<f64> = truth.iter().map(|v| v + 0.5).collect();
        let m = compute_metrics(&traj(&shifted, 2), &truth, None).unwrap();
        assert!((m.bias - 0.5).abs() < 1e-15);
        assert!((m.mse - 0.25).abs() < 1e-15);
        assert!((m.signed_error - 0.5).abs() < 1e-15);
    }

    #[test]
    fn replicas_average_squared_error() {
        let truth = [0.0; 4];
        let reps = vec![traj(&[0.0, 0.0, 1.0, 1.0], 2), traj(&[0.0, 0.0, -3.0, 3.0], 2)];
        let m = compute_metrics(&traj(&truth, 2), &truth, Some(&reps)).unwrap();
        assert_eq!(m.mse, (1.0 + 1.0 + 9.0 + 9.0) / 4.0);
        assert_eq!(m.replicas, 2);
        assert_eq!(m.bias, 0.0);
    }

    #[test]
    fn misaligned_truth_rejected() {
        assert!(compute_metrics(&traj(&[0.0; 4], 2), &[0.0; 3], None).is_err());
    }
}
