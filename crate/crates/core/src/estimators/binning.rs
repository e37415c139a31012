//! Per-dimension quantile binning and joint state encoding.

use crate::numerics::quantile_sorted;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Binning {
    /// Interior edges per dimension, strictly increasing. A value equal to an edge
    /// falls in the upper bin.
    pub edges: Vec<Vec<f64>>,
}

impl Binning {
    /// `columns[d]` holds every value of dimension d to be binned. Dimensions with at
    /// most `n_bins` distinct values get one bin per value.
    pub fn fit(columns: &[Vec<f64>], n_bins: usize) -> Binning {
        let n_bins = n_bins.max(1);
        let edges = columns
            .iter()
            .map(|col| {
                let mut s: Vec<f64> = col.iter().copied().filter(|v| v.is_finite()).collect();
                s.sort_by(f64::total_cmp);
                if s.is_empty() {
                    return vec![];
                }
                let mut distinct = s.clone();
                distinct.dedup();
                if distinct.len() <= n_bins {
                    return distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                }
                let mut e: Vec<f64> = (1..n_bins).map(|k| quantile_sorted(&s, k as f64 / n_bins as f64)).collect();
                e.dedup();
                e.retain(|&v| v > s[0]);
                e
            })
            .collect();
        Binning { edges }
    }

    pub fn dims(&self) -> usize {
        self.edges.len()
    }

    pub fn bins_in(&self, d: usize) -> usize {
        self.edges[d].len() + 1
    }

    pub fn bin_value(&self, d: usize, v: f64) -> usize {
        self.edges[d].partition_point(|&e| e <= v)
    }

    pub fn bin(&self, x: &[f64]) -> Vec<usize> {
        x.iter().enumerate().map(|(d, &v)| self.bin_value(d, v)).collect()
    }

    /// Mixed-radix code of a bin vector.
    pub fn encode(&self, bins: &[usize]) -> usize {
        let mut code = 0;
        for (d, &b) in bins.iter().enumerate() {
            code = code * self.bins_in(d) + b;
        }
        code
    }

    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for d in (0..self.dims()).rev() {
            out[d] = code % self.bins_in(d);
            code /= self.bins_in(d);
        }
        out
    }

    pub fn n_states(&self) -> usize {
        (0..self.dims()).map(|d| self.bins_in(d)).product()
    }

    pub fn state(&self, x: &[f64]) -> usize {
        self.encode(&self.bin(x))
    }
}

/// Cell id of a covariate vector: distinct vectors numbered in order of first appearance.
pub fn covariate_cells(rows: &[&[f64]]) -> Vec<usize> {
    let mut seen: Vec<Vec<u64>> = Vec::new();
    rows.iter()
        .map(|r| {
            let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
            match seen.iter().position(|k| *k == key) {
                Some(p) => p,
                None => {
                    seen.push(key);
                    seen.len() - 1
                }
            }
        })
        .collect()
}
