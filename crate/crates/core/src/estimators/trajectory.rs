//! Per-period effect estimates with provenance and optional bands.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Extrapolated,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Observed => "observed",
            Provenance::Extrapolated => "extrapolated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub period: usize,
    pub estimate: f64,
    pub provenance: Provenance,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl TrajectoryPoint {
    pub fn new(period: usize, estimate: f64, provenance: Provenance) -> Self {
        TrajectoryPoint { period, estimate, provenance, lower: None, upper: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTrajectory {
    pub estimator: String,
    /// Canonical description of the options that produced the estimates.
    pub options_fingerprint: String,
    pub t_experimental: usize,
    pub points: Vec<TrajectoryPoint>,
}

impl EffectTrajectory {
    /// Observed prefix 1..=T_E followed by extrapolated values for T_E+1..=T.
    pub fn from_parts(
        estimator: &str,
        options_fingerprint: String,
        observed: Vec<TrajectoryPoint>,
        extrapolated: &[f64],
    ) -> Self {
        let te = observed.len();
        let mut points = observed;
        points.extend(
            extrapolated
                .iter()
                .enumerate()
                .map(|(k, &v)| TrajectoryPoint::new(te + 1 + k, v, Provenance::Extrapolated)),
        );
        EffectTrajectory { estimator: estimator.to_string(), options_fingerprint, t_experimental: te, points }
    }

    pub fn t_total(&self) -> usize {
        self.points.len()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.estimate).collect()
    }

    /// τ̂ at period t (1-based).
    pub fn at(&self, t: usize) -> f64 {
        self.points[t - 1].estimate
    }

    /// Last-period estimate τ̂_T.
    pub fn last(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.estimate)
    }

    pub fn future(&self) -> &[TrajectoryPoint] {
        &self.points[self.t_experimental..]
    }

    /// Attaches per-period bands (length T).
    pub fn with_band(mut self, lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != self.points.len() || upper.len() != self.points.len() {
            return Err(Error::arg("estimators", "band length differs from trajectory length"));
        }
        for (p, (&l, &u)) in self.points.iter_mut().zip(lower.iter().zip(upper)) {
            p.lower = Some(l);
            p.upper = Some(u);
        }
        Ok(self)
    }

    /// CSV with columns `period, estimate, provenance, lower, upper`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["period", "estimate", "provenance", "lower", "upper"])
            .map_err(|e| Error::Data(e.to_string()))?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for p in &self.points {
            w.write_record([
                p.period.to_string(),
                format!("{}", p.estimate),
                p.provenance.as_str().to_string(),
                opt(p.lower),
                opt(p.upper),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Same trajectory with every estimate (and band) negated; bands swap ends.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for p in &mut out.points {
            p.estimate = -p.estimate;
            let (l, u) = (p.lower, p.upper);
            p.lower = u.map(|v| -v);
            p.upper = l.map(|v| -v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_and_csv() {
        let obs = vec![TrajectoryPoint::new(1, 1.0, Provenance::Observed), TrajectoryPoint::new(2, 1.2, Provenance::Observed)];
        let tr = EffectTrajectory::from_parts("ceb", "ceb".into(), obs, &[1.1, 1.1]);
        assert_eq!(tr.t_total(), 4);
        assert_eq!(tr.future().len(), 2);
        assert_eq!(tr.points[2].provenance, Provenance::Extrapolated);
        let tr = tr.with_band(&[0.0; 4], &[2.0; 4]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("period,estimate,provenance,lower,upper\n1,1,observed,0,2\n"));
        assert!(text.contains("4,1.1,extrapolated,0,2"));
        let neg = tr.negated();
        assert_eq!(neg.at(2), -1.2);
        assert_eq!(neg.points[0].lower, Some(-2.0));
    }
}
