//! Covariance and penalty matrices.

use nalgebra::DMatrix;

use crate::data::{column_moments, is_constant, DesignMatrix};
use crate::error::{invalid, Error, Result};

/// A symmetric p×p matrix with nonnegative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    values: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (r, c) = values.shape();
        if r != c || r == 0 {
            return Err(Error::Dimension(format!("covariance must be square, got {r}×{c}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite covariance entry");
        }
        let scale = values.amax().max(1.0);
        for i in 0..r {
            if values[(i, i)] < 0.0 {
                return invalid(format!("negative variance at index {i}"));
            }
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 * scale {
                    return invalid(format!("covariance not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Smallest eigenvalue, and the positive-semidefiniteness verdict at relative
    /// tolerance 1e-8.
    pub fn check_psd(&self) -> Result<()> {
        let eig = nalgebra::SymmetricEigen::new(self.values.clone()).eigenvalues;
        let min = eig.min();
        let max = eig.max();
        if min < -1e-8 * max.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(())
    }
}

/// Correlation matrix of the given rows: the divisor-n covariance of the
/// column-standardized data, symmetric with an exact unit diagonal.
pub(crate) fn correlation_of_rows(x: &DMatrix<f64>, rows: &[usize], names: &[String]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let p = x.ncols();
    if m < 2 {
        return invalid("need at least 2 observations");
    }
    let (means, sds) = column_moments(x, rows);
    if let Some(j) = (0..p).find(|&j| is_constant(sds[j], means[j])) {
        return Err(Error::ConstantColumn(names[j].clone()));
    }
    let z = DMatrix::from_fn(m, p, |i, j| (x[(rows[i], j)] - means[j]) / sds[j]);
    let mut s = z.tr_mul(&z) / m as f64;
    for i in 0..p {
        s[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Empirical correlation matrix of `x` (maximum-likelihood covariance of the
/// standardized columns).
pub fn empirical_covariance(x: &DesignMatrix) -> Result<CovarianceMatrix> {
    let rows: Vec<usize> = (0..x.n()).collect();
    let s = correlation_of_rows(x.values(), &rows, x.names())?;
    Ok(CovarianceMatrix { values: s })
}

/// Symmetric, nonnegative, zero-diagonal matrix of element-wise penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    values: DMatrix<f64>,
}

impl PenaltyMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (r, c) = values.shape();
        if r != c {
            return Err(Error::Dimension(format!("penalty must be square, got {r}×{c}")));
        }
        for i in 0..r {
            if values[(i, i)] != 0.0 {
                return invalid(format!("penalty diagonal must be zero, got {} at {i}", values[(i, i)]));
            }
            for j in 0..r {
                let v = values[(i, j)];
                if !(v >= 0.0) || v.is_infinite() {
                    return invalid(format!("penalty entries must be finite and nonnegative, got {v}"));
                }
                if v != values[(j, i)] {
                    return invalid(format!("penalty not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn constant(p: usize, lambda: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { lambda }))
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Graphical LASSO penalty: one value for every off-diagonal entry, or a full matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    Scalar(f64),
    Matrix(PenaltyMatrix),
}

impl Penalty {
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match self {
            Penalty::Scalar(l) => *l,
            Penalty::Matrix(m) => m.values[(i, j)],
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Penalty::Scalar(l) if !(*l >= 0.0 && l.is_finite()) => {
                invalid(format!("penalty must be finite and nonnegative, got {l}"))
            }
            Penalty::Matrix(m) if m.p() != p => {
                Err(Error::Dimension(format!("penalty is {}×{0}, covariance is {p}×{p}", m.p())))
            }
            _ => Ok(()),
        }
    }

    pub fn to_matrix(&self, p: usize) -> PenaltyMatrix {
        match self {
            Penalty::Scalar(l) => PenaltyMatrix::constant(p, *l).expect("validated scalar"),
            Penalty::Matrix(m) => m.clone(),
        }
    }
}
