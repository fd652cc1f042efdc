//! LASSO linear regression by cyclic coordinate descent.
//!
//! The objective is the residual sum of squares plus `λ Σ|bⱼ|`, where `bⱼ` are the
//! coefficients of the standardized columns (zero mean, unit population variance).
//! The intercept is unpenalized. Fitted coefficients are mapped back to the original
//! scale. With this scaling the smallest penalty giving an empty model is
//! `λ_max = 2 maxⱼ |zⱼᵀ(y − ȳ)|`.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{soft_threshold, KktReport};
use crate::data::{column_moments, is_constant, DesignMatrix};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoOptions {
    /// Largest coefficient change (standardized scale) allowed in the final sweep.
    pub tol: f64,
    /// Stationarity tolerance relative to `max(1, √n ‖y − ȳ‖)`, which bounds every
    /// `|zⱼᵀ(y − ȳ)|`.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-7, kkt_tol: 1e-10, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LassoFit {
    pub fn selected(&self) -> Vec<bool> {
        self.coefficients.iter().map(|&b| b != 0.0).collect()
    }

    pub fn n_selected(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b != 0.0).count()
    }
}

/// Standardized view of a row subset: non-constant columns as contiguous vectors.
pub(crate) struct Standardized {
    n: usize,
    p: usize,
    /// Original column index of each kept column.
    kept: Vec<usize>,
    /// Column-major, one contiguous block of length n per kept column.
    z: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    y_mean: f64,
    y_centered: Vec<f64>,
}

impl Standardized {
    pub(crate) fn new(x: &DMatrix<f64>, y: &[f64], rows: &[usize], names: Option<&[String]>) -> Self {
        let n = rows.len();
        let p = x.ncols();
        let (means, sds) = column_moments(x, rows);
        let mut kept = Vec::with_capacity(p);
        let mut z = Vec::with_capacity(n * p);
        for j in 0..p {
            if is_constant(sds[j], means[j]) {
                let label = names.map(|nm| nm[j].clone()).unwrap_or_else(|| format!("#{j}"));
                warn!("column {label} is constant on the fitted rows; coefficient fixed to 0");
                continue;
            }
            kept.push(j);
            let col = x.column(j);
            z.extend(rows.iter().map(|&i| (col[i] - means[j]) / sds[j]));
        }
        let y_mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        let y_centered = rows.iter().map(|&i| y[i] - y_mean).collect();
        Self { n, p, kept, z, means, sds, y_mean, y_centered }
    }

    fn col(&self, k: usize) -> &[f64] {
        &self.z[k * self.n..(k + 1) * self.n]
    }

    pub(crate) fn lambda_max(&self) -> f64 {
        (0..self.kept.len())
            .map(|k| 2.0 * dot(self.col(k), &self.y_centered).abs())
            .fold(0.0, f64::max)
    }

    fn kkt_scale(&self) -> f64 {
        let norm = self.y_centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        (norm * (self.n as f64).sqrt()).max(1.0)
    }

    fn residual(&self, b: &[f64]) -> Vec<f64> {
        let mut r = self.y_centered.clone();
        for (k, &bk) in b.iter().enumerate() {
            if bk != 0.0 {
                axpy(-bk, self.col(k), &mut r);
            }
        }
        r
    }

    /// Largest violation of the stationarity conditions for standardized coefficients `b`.
    fn kkt_residual(&self, b: &[f64], lambda: f64) -> f64 {
        let r = self.residual(b);
        b.iter()
            .enumerate()
            .map(|(k, &bk)| {
                let grad = -2.0 * dot(self.col(k), &r);
                if bk == 0.0 {
                    (grad.abs() - lambda).max(0.0)
                } else {
                    (grad + lambda * bk.signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    fn to_fit(&self, b: &[f64], lambda: f64, iterations: usize, converged: bool) -> LassoFit {
        let mut coefficients = vec![0.0; self.p];
        let mut intercept = self.y_mean;
        for (k, &j) in self.kept.iter().enumerate() {
            if b[k] != 0.0 {
                let beta = b[k] / self.sds[j];
                coefficients[j] = beta;
                intercept -= beta * self.means[j];
            }
        }
        LassoFit { coefficients, intercept, lambda, iterations, converged }
    }

    /// Warm-started coordinate descent over a descending grid.
    pub(crate) fn path(&self, lambdas: &[f64], opts: &LassoOptions) -> Vec<LassoFit> {
        let m = self.kept.len();
        let n = self.n as f64;
        let kkt_threshold = opts.kkt_tol * self.kkt_scale();
        let mut b = vec![0.0; m];
        let mut r = self.y_centered.clone();
        let mut fits = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let half = lambda / 2.0;
            let mut sweeps = 0;
            let mut converged = false;
            while sweeps < opts.max_sweeps {
                sweeps += 1;
                let mut max_delta: f64 = 0.0;
                for k in 0..m {
                    let zk = self.col(k);
                    let rho = dot(zk, &r) + n * b[k];
                    let new = soft_threshold(rho, half) / n;
                    let delta = new - b[k];
                    if delta != 0.0 {
                        axpy(-delta, zk, &mut r);
                        b[k] = new;
                        max_delta = max_delta.max(delta.abs());
                    }
                }
                if max_delta < opts.tol {
                    r = self.residual(&b);
                    if self.kkt_residual(&b, lambda) <= kkt_threshold {
                        converged = true;
                        break;
                    }
                }
            }
            fits.push(self.to_fit(&b, lambda, sweeps, converged));
        }
        fits
    }
}

fn validate_xy(x: &DesignMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.n() {
        return Err(Error::Dimension(format!("y has {} entries for {} rows", y.len(), x.n())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("non-finite outcome value");
    }
    Ok(())
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return invalid(format!("penalty must be finite and nonnegative, got {lambda}"));
    }
    Ok(())
}

/// Smallest penalty at which every coefficient is zero.
pub fn lasso_lambda_max(x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    validate_xy(x, y)?;
    let rows: Vec<usize> = (0..x.n()).collect();
    Ok(Standardized::new(x.values(), y, &rows, Some(x.names())).lambda_max())
}

pub fn fit_lasso(x: &DesignMatrix, y: &[f64], lambda: f64, opts: &LassoOptions) -> Result<LassoFit> {
    Ok(lasso_path(x, y, &[lambda], opts)?.remove(0))
}

/// Fits along a strictly descending grid, each fit warm-started from the previous one.
pub fn lasso_path(x: &DesignMatrix, y: &[f64], lambdas: &[f64], opts: &LassoOptions) -> Result<Vec<LassoFit>> {
    validate_xy(x, y)?;
    if lambdas.is_empty() {
        return invalid("empty penalty grid");
    }
    for &l in lambdas {
        validate_lambda(l)?;
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("penalty grid must be strictly descending");
    }
    let rows: Vec<usize> = (0..x.n()).collect();
    Ok(Standardized::new(x.values(), y, &rows, Some(x.names())).path(lambdas, opts))
}

/// Checks the stationarity conditions of `fit` with the same standardization as
/// [`fit_lasso`]: `|gⱼ| ≤ λ + tol` for zero coefficients and `|gⱼ + λ sign(bⱼ)| ≤ tol`
/// otherwise, where `gⱼ = −2 zⱼᵀ r` is the gradient of the residual sum of squares.
pub fn check_kkt_lasso(x: &DesignMatrix, y: &[f64], fit: &LassoFit, tol: f64) -> Result<KktReport> {
    validate_xy(x, y)?;
    if fit.coefficients.len() != x.p() {
        return Err(Error::Dimension("coefficient vector does not match the design".into()));
    }
    let rows: Vec<usize> = (0..x.n()).collect();
    let st = Standardized::new(x.values(), y, &rows, Some(x.names()));
    let b: Vec<f64> = st.kept.iter().map(|&j| fit.coefficients[j] * st.sds[j]).collect();
    Ok(KktReport::new(st.kkt_residual(&b, fit.lambda), tol))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
