//! k-nearest-neighbour variant of the sliding forecaster.
//!
//! ĝ and ĥ are replaced by the mean period-T_E target of the k training rows
//! nearest (Euclidean) to the query, within the arm. Distance ties are broken by
//! the lower training row index.

use super::lsm::{slide_forecast, LaggedDesign};
use super::trajectory::EffectTrajectory;
use crate::error::{Error, Result};
use crate::panel::{observed_effects, PanelDataset};

pub const DEFAULT_K: usize = 20;

struct KnnModel {
    design: LaggedDesign,
    k: usize,
}

impl KnnModel {
    fn predict(&self, q: &[f64]) -> Vec<f64> {
        let x = &self.design.features;
        let mut dist: Vec<(f64, usize)> = (0..x.rows())
            .map(|r| (x.row(r).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), r))
            .collect();
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
        }
        // summation in row order keeps the result independent of selection order
        let mut rows: Vec<usize> = dist.into_iter().map(|(_, r)| r).collect();
        rows.sort_unstable();
        self.design
            .targets
            .iter()
            .map(|t| rows.iter().map(|&r| t[r]).sum::<f64>() / k as f64)
            .collect()
    }
}

pub fn estimate_knn(ds: &PanelDataset, k: usize) -> Result<EffectTrajectory> {
    let obs = ds.observed();
    if k == 0 {
        return Err(Error::arg("estimators", "k must be at least 1"));
    }
    let models: Vec<KnnModel> = [0u8, 1]
        .iter()
        .map(|&arm| {
            let design = LaggedDesign::build(&obs, arm, false);
            if k > design.features.rows() {
                return Err(Error::arg(
                    "estimators",
                    format!("k={k} exceeds the {} units of arm {arm}", design.features.rows()),
                ));
            }
            Ok(KnnModel { design, k })
        })
        .collect::<Result<_>>()?;
    let means = slide_forecast(&obs, false, |arm, feat| models[arm as usize].predict(feat));
    let future: Vec<f64> = means.iter().map(|m| m[1] - m[0]).collect();
    let observed = observed_effects(ds, obs.t_experimental())?;
    Ok(EffectTrajectory::from_parts("knn", format!("knn(k={k})"), observed, &future))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::testutil::tiny;

    #[test]
    fn k_equal_arm_size_gives_arm_mean() {
        let ds = tiny(8, 5, 3, 1, 0.4);
        let obs = ds.observed();
        let design = LaggedDesign::build(&obs, 1, false);
        let m = KnnModel { k: design.features.rows(), design };
        let p = m.predict(&[100.0, -3.0, 7.0, 7.0]);
        let mean_y: f64 = m.design.targets[0].iter().sum::<f64>() / m.design.targets[0].len() as f64;
        assert!((p[0] - mean_y).abs() < 1e-12);
    }

    #[test]
    fn k_one_reproduces_training_targets() {
        let ds = tiny(8, 5, 3, 1, 0.4);
        let obs = ds.observed();
        let design = LaggedDesign::build(&obs, 0, false);
        let m = KnnModel { k: 1, design };
        for r in 0..m.design.features.rows() {
            let p = m.predict(m.design.features.row(r));
            // rows may coincide; a duplicate with a lower index wins
            let first = (0..m.design.features.rows()).find(|&q| m.design.features.row(q) == m.design.features.row(r)).unwrap();
            assert_eq!(p[0], m.design.targets[0][first]);
        }
    }

    #[test]
    fn k_too_large_rejected() {
        let ds = tiny(4, 4, 2, 1, 0.0);
        assert!(estimate_knn(&ds, 50).is_err());
        assert!(estimate_knn(&ds, 0).is_err());
    }

    #[test]
    fn arm_swap_negates() {
        let ds = tiny(10, 5, 3, 2, 0.7);
        let a = estimate_knn(&ds, 3).unwrap();
        let b = estimate_knn(&ds.arm_swapped(), 3).unwrap();
        for t in 1..=5 {
            assert!((a.at(t) + b.at(t)).abs() < 1e-12);
        }
    }
}
