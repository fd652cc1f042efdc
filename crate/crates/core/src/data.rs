//! Observation matrices.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// An n×p matrix of observations with one name per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return invalid(format!("need at least 2 observations, got {n}"));
        }
        if p < 1 {
            return invalid("need at least one column");
        }
        if names.len() != p {
            return Err(Error::Dimension(format!("{} names for {p} columns", names.len())));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!(
                "non-finite value at row {}, column `{}`",
                idx % n,
                names[idx / n]
            ));
        }
        let mut seen = HashSet::with_capacity(p);
        for name in &names {
            if !seen.insert(name.as_str()) {
                return invalid(format!("duplicate feature name `{name}`"));
            }
        }
        Ok(Self { values, names })
    }

    /// Columns named `v1..vp`.
    pub fn with_default_names(values: DMatrix<f64>) -> Result<Self> {
        let names = default_names(values.ncols());
        Self::new(values, names)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Copy of the rows listed in `rows` (repetitions allowed).
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(rows.len(), p, |i, j| self.values[(rows[i], j)])
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("v{j}")).collect()
}

/// Per-column mean and population standard deviation (divisor n) of the rows in `rows`.
pub(crate) fn column_moments(x: &DMatrix<f64>, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let m = rows.len() as f64;
    let p = x.ncols();
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        let col = x.column(j);
        let mean = rows.iter().map(|&i| col[i]).sum::<f64>() / m;
        let var = rows.iter().map(|&i| (col[i] - mean).powi(2)).sum::<f64>() / m;
        means[j] = mean;
        sds[j] = var.sqrt();
    }
    (means, sds)
}

/// Relative threshold under which a column is treated as constant.
pub(crate) fn is_constant(sd: f64, mean: f64) -> bool {
    sd <= 1e-12 * mean.abs().max(1.0)
}
