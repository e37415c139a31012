//! Least squares with an internal intercept: Householder QR for ordinary fits,
//! Cholesky on the centered normal equations for the ridge fallback.

use crate::error::{Error, Result};
use serde::Serialize;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }
}

/// Result of a linear fit with intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Present only for ordinary (unregularized, full-rank) fits.
    pub coefficient_standard_errors: Option<Vec<f64>>,
    pub intercept_standard_error: Option<f64>,
    pub residual_variance: f64,
    pub n_observations: usize,
    /// N − P − 1.
    pub df_residual: f64,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    /// Constant model: intercept only, all slopes zero.
    pub fn constant(width: usize, value: f64, n: usize) -> Self {
        LinearFit {
            intercept: value,
            coefficients: vec![0.0; width],
            coefficient_standard_errors: None,
            intercept_standard_error: None,
            residual_variance: 0.0,
            n_observations: n,
            df_residual: n as f64 - 1.0,
        }
    }
}

const RANK_TOL: f64 = 1e-9;

/// Weighted column means and the centered, √w-scaled design in column-major order.
struct Centered {
    n: usize,
    p: usize,
    means: Vec<f64>,
    cols: Vec<Vec<f64>>,
    sqrt_w: Vec<f64>,
    sum_w: f64,
}

fn center(design: &Matrix, weights: Option<&[f64]>) -> Result<Centered> {
    let (n, p) = (design.rows(), design.cols());
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::arg("numerics", "weights length differs from design rows"));
            }
            if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::arg("numerics", "weights must be finite and non-negative"));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    let sum_w: f64 = w.iter().sum();
    if !(sum_w > 0.0) {
        return Err(Error::arg("numerics", "weights sum to zero"));
    }
    let mut means = vec![0.0; p];
    for i in 0..n {
        let row = design.row(i);
        for j in 0..p {
            means[j] += w[i] * row[j];
        }
    }
    for m in &mut means {
        *m /= sum_w;
    }
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut cols = vec![vec![0.0; n]; p];
    for i in 0..n {
        let row = design.row(i);
        for j in 0..p {
            cols[j][i] = (row[j] - means[j]) * sqrt_w[i];
        }
    }
    Ok(Centered { n, p, means, cols, sqrt_w, sum_w })
}

fn weighted_mean(y: &[f64], c: &Centered) -> f64 {
    y.iter().zip(&c.sqrt_w).map(|(v, s)| v * s * s).sum::<f64>() / c.sum_w
}

/// Householder QR of the centered design; reusable across targets.
pub struct QrSolver {
    c: Centered,
    /// Householder vectors stored in place below (and on) the diagonal.
    v: Vec<Vec<f64>>,
    rdiag: Vec<f64>,
    r: Vec<Vec<f64>>,
}

impl QrSolver {
    /// Factorizes `design` (no intercept column). Fails with the dependent column set
    /// when the centered design is rank deficient.
    pub fn new(design: &Matrix, weights: Option<&[f64]>) -> Result<Self> {
        if design.rows() <= design.cols() {
            return Err(Error::arg(
                "numerics",
                format!("ols needs N > P (N={}, P={})", design.rows(), design.cols()),
            ));
        }
        let c = center(design, weights)?;
        let (n, p) = (c.n, c.p);
        let norms: Vec<f64> = c.cols.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let mut a = c.cols.clone();
        let mut v = Vec::with_capacity(p);
        let mut rdiag = vec![0.0; p];
        let mut dependent = Vec::new();
        for k in 0..p {
            let norm = a[k][k..].iter().map(|x| x * x).sum::<f64>().sqrt();
            let alpha = if a[k][k] > 0.0 { -norm } else { norm };
            let mut hv: Vec<f64> = a[k][k..].to_vec();
            hv[0] -= alpha;
            let vnorm2: f64 = hv.iter().map(|x| x * x).sum();
            rdiag[k] = alpha;
            if !(norm > RANK_TOL * norms[k]) || norms[k] == 0.0 {
                dependent.push(k);
            }
            if vnorm2 > 0.0 {
                for col in a.iter_mut().skip(k + 1) {
                    let dot: f64 = hv.iter().zip(&col[k..]).map(|(x, y)| x * y).sum();
                    let f = 2.0 * dot / vnorm2;
                    for (ci, hi) in col[k..].iter_mut().zip(&hv) {
                        *ci -= f * hi;
                    }
                }
            }
            v.push(hv);
        }
        if !dependent.is_empty() {
            return Err(Error::Singular { columns: dependent });
        }
        let _ = n;
        // Upper triangle of R, column j holds R[0..j, j].
        let r: Vec<Vec<f64>> = (0..p).map(|j| a[j][..j].to_vec()).collect();
        Ok(QrSolver { c, v, rdiag, r })
    }

    fn apply_qt(&self, y: &mut [f64]) {
        for (k, hv) in self.v.iter().enumerate() {
            let vnorm2: f64 = hv.iter().map(|x| x * x).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            let dot: f64 = hv.iter().zip(&y[k..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (yi, hi) in y[k..].iter_mut().zip(hv) {
                *yi -= f * hi;
            }
        }
    }

    fn r_at(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.rdiag[j]
        } else {
            self.r[j][i]
        }
    }

    /// Inverse of the upper-triangular R.
    fn r_inverse(&self) -> Vec<Vec<f64>> {
        let p = self.c.p;
        let mut inv = vec![vec![0.0; p]; p];
        for j in 0..p {
            inv[j][j] = 1.0 / self.rdiag[j];
            for i in (0..j).rev() {
                let s: f64 = (i + 1..=j).map(|k| self.r_at(i, k) * inv[k][j]).sum();
                inv[i][j] = -s / self.rdiag[i];
            }
        }
        inv
    }

    /// Fits one target.
    pub fn fit(&self, target: &[f64]) -> Result<LinearFit> {
        let (n, p) = (self.c.n, self.c.p);
        if target.len() != n {
            return Err(Error::arg("numerics", "target length differs from design rows"));
        }
        let ybar = weighted_mean(target, &self.c);
        let yc: Vec<f64> = target.iter().zip(&self.c.sqrt_w).map(|(y, s)| (y - ybar) * s).collect();
        let mut qty = yc.clone();
        self.apply_qt(&mut qty);
        let mut beta = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|k| self.r_at(i, k) * beta[k]).sum();
            beta[i] = (qty[i] - s) / self.rdiag[i];
        }
        let mut rss = 0.0;
        for i in 0..n {
            let fitted: f64 = (0..p).map(|j| self.c.cols[j][i] * beta[j]).sum();
            let r = yc[i] - fitted;
            rss += r * r;
        }
        let df = n as f64 - p as f64 - 1.0;
        let sigma2 = if df > 0.0 { rss / df } else { 0.0 };
        let rinv = self.r_inverse();
        let mut cov = vec![vec![0.0; p]; p];
        for a in 0..p {
            for b in a..p {
                let s: f64 = (b.max(a)..p).map(|k| rinv[a][k] * rinv[b][k]).sum();
                cov[a][b] = s * sigma2;
                cov[b][a] = cov[a][b];
            }
        }
        let (se, ise) = if df > 0.0 {
            let se: Vec<f64> = (0..p).map(|j| cov[j][j].max(0.0).sqrt()).collect();
            let mut v0 = sigma2 / self.c.sum_w;
            for a in 0..p {
                for b in 0..p {
                    v0 += self.c.means[a] * cov[a][b] * self.c.means[b];
                }
            }
            (se, v0.max(0.0).sqrt())
        } else {
            (vec![f64::NAN; p], f64::NAN)
        };
        let intercept = ybar - self.c.means.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
        Ok(LinearFit {
            intercept,
            coefficients: beta,
            coefficient_standard_errors: Some(se),
            intercept_standard_error: Some(ise),
            residual_variance: sigma2,
            n_observations: n,
            df_residual: df,
        })
    }
}

/// Ordinary least squares with an internal intercept.
pub fn ols_fit(design: &Matrix, target: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    QrSolver::new(design, weights)?.fit(target)
}

/// Ridge on the centered normal equations with λ = `rel_lambda` × mean diagonal of XᵀX.
/// The intercept is unpenalized. Standard errors are not reported.
pub fn ridge_fit_multi(design: &Matrix, targets: &[Vec<f64>], rel_lambda: f64) -> Result<Vec<LinearFit>> {
    let c = center(design, None)?;
    let (n, p) = (c.n, c.p);
    let mut xtx = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in a..p {
            let s: f64 = c.cols[a].iter().zip(&c.cols[b]).map(|(x, y)| x * y).sum();
            xtx[a][b] = s;
            xtx[b][a] = s;
        }
    }
    let mean_diag = if p > 0 { (0..p).map(|j| xtx[j][j]).sum::<f64>() / p as f64 } else { 0.0 };
    let lambda = rel_lambda * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    for (j, row) in xtx.iter_mut().enumerate() {
        row[j] += lambda;
    }
    let l = cholesky(&xtx).ok_or_else(|| Error::Singular {
        columns: (0..p).filter(|&j| xtx[j][j] <= 0.0).collect(),
    })?;
    targets
        .iter()
        .map(|y| {
            if y.len() != n {
                return Err(Error::arg("numerics", "target length differs from design rows"));
            }
            let ybar = weighted_mean(y, &c);
            let xty: Vec<f64> = (0..p)
                .map(|j| c.cols[j].iter().zip(y).map(|(x, v)| x * (v - ybar)).sum())
                .collect();
            let beta = cholesky_solve(&l, &xty);
            let mut rss = 0.0;
            for i in 0..n {
                let fitted: f64 = (0..p).map(|j| c.cols[j][i] * beta[j]).sum();
                let r = y[i] - ybar - fitted;
                rss += r * r;
            }
            let df = n as f64 - p as f64 - 1.0;
            let intercept = ybar - c.means.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
            Ok(LinearFit {
                intercept,
                coefficients: beta,
                coefficient_standard_errors: None,
                intercept_standard_error: None,
                residual_variance: if df > 0.0 { rss / df } else { 0.0 },
                n_observations: n,
                df_residual: df,
            })
        })
        .collect()
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let p = a.len();
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let p = l.len();
    let mut z = vec![0.0; p];
    for i in 0..p {
        let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| l[k][i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i][i];
    }
    x
}
