use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{invalid, Result};
use crate::resampling::SelectionProportionArray;
use crate::solvers::glasso::{max_offdiag, GlassoSolver};
use crate::solvers::lasso::Standardized;
use crate::solvers::{CovarianceMatrix, GlassoOptions, LassoOptions, Penalty};

/// Target fraction of selected features at the dense end of a penalty grid.
pub const DENSE_FRACTION: f64 = 0.5;
/// Lowest admissible grid end, relative to the empty-model penalty.
pub const FLOOR_RATIO: f64 = 1e-3;

/// `m` equally spaced thresholds from 0.6 to 0.9, each the nearest double to an
/// exact ratio of integers.
pub fn build_pi_grid(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return invalid(format!("threshold grid needs at least 2 values, got {m}"));
    }
    let d = (m - 1) as f64;
    Ok((0..m).map(|i| (6.0 * d + 3.0 * i as f64) / (10.0 * d)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lambdas: Vec<f64>,
    /// The dense end could not reach the target density above the floor.
    pub floor_hit: bool,
}

pub(crate) fn log_grid(lmax: f64, lmin: f64, l: usize) -> Vec<f64> {
    let (a, b) = (lmax.ln(), lmin.ln());
    let mut out: Vec<f64> = (0..l).map(|k| (a + (b - a) * k as f64 / (l - 1) as f64).exp()).collect();
    out[0] = lmax;
    out[l - 1] = lmin;
    out
}

/// Log-spaced grid from `lmax` (empty model) down to the largest penalty whose
/// selected fraction is at least [`DENSE_FRACTION`], located by bisection on log λ and
/// floored at `FLOOR_RATIO · lmax`.
pub(crate) fn grid_by_density<F>(lmax: f64, l: usize, mut density: F) -> Result<LambdaGrid>
where
    F: FnMut(f64) -> Result<f64>,
{
    if l < 2 {
        return invalid(format!("penalty grid needs at least 2 values, got {l}"));
    }
    if !(lmax > 0.0 && lmax.is_finite()) {
        return invalid("the empty-model penalty is zero: nothing to select");
    }
    let floor = FLOOR_RATIO * lmax;
    if density(floor)? < DENSE_FRACTION {
        warn!("target density {DENSE_FRACTION} not reached above {floor:.3e}; grid stops at the floor");
        return Ok(LambdaGrid { lambdas: log_grid(lmax, floor, l), floor_hit: true });
    }
    let (mut lo, mut hi) = (floor.ln(), lmax.ln());
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if density(mid.exp())? >= DENSE_FRACTION {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LambdaGrid { lambdas: log_grid(lmax, lo.exp(), l), floor_hit: false })
}

/// Penalty grid for LASSO regression on the full data.
pub fn lasso_lambda_grid(x: &DesignMatrix, y: &[f64], l: usize, opts: &LassoOptions) -> Result<LambdaGrid> {
    let lmax = crate::solvers::lasso_lambda_max(x, y)?;
    let rows: Vec<usize> = (0..x.n()).collect();
    let st = Standardized::new(x.values(), y, &rows, Some(x.names()));
    let p = x.p() as f64;
    grid_by_density(lmax, l, |lambda| Ok(st.path(&[lambda], opts)[0].n_selected() as f64 / p))
}

/// Penalty grid for the graphical LASSO on the full-data correlation matrix.
pub fn glasso_lambda_grid(s: &CovarianceMatrix, l: usize, opts: &GlassoOptions) -> Result<LambdaGrid> {
    s.check_psd()?;
    let p = s.p();
    if p < 2 {
        return invalid("graphical models need at least 2 variables");
    }
    let pairs = (p * (p - 1) / 2) as f64;
    let lmax = max_offdiag(s.values());
    grid_by_density(lmax, l, |lambda| {
        let est = GlassoSolver::new(s.values(), *opts).fit(&Penalty::Scalar(lambda));
        Ok(est.n_edges() as f64 / pairs)
    })
}

/// Penalty and threshold grids together with the per-penalty average model size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub lambdas: Vec<f64>,
    pub pis: Vec<f64>,
    /// Running maximum of `q_raw` along the grid.
    pub q: Vec<f64>,
    pub q_raw: Vec<f64>,
}

impl CalibrationGrid {
    pub fn new(lambdas: Vec<f64>, pis: Vec<f64>, q_raw: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || pis.is_empty() {
            return invalid("empty calibration grid");
        }
        if lambdas.windows(2).any(|w| w[1] >= w[0]) || lambdas.iter().any(|l| !(*l >= 0.0)) {
            return invalid("penalties must be nonnegative and strictly descending");
        }
        if pis.windows(2).any(|w| w[1] <= w[0]) || pis.iter().any(|p| !(*p > 0.5 && *p < 1.0)) {
            return invalid("thresholds must lie in (0.5, 1) and be strictly increasing");
        }
        if q_raw.len() != lambdas.len() || q_raw.iter().any(|q| !(*q >= 0.0)) {
            return invalid("need one nonnegative average model size per penalty");
        }
        let mut run = 0.0f64;
        let q = q_raw
            .iter()
            .map(|&v| {
                run = run.max(v);
                run
            })
            .collect();
        Ok(Self { lambdas, pis, q, q_raw })
    }

    /// Keeps `q` as given, for grids whose points are not ordered by sparsity.
    pub(crate) fn unregularized(lambdas: Vec<f64>, pis: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let mut g = Self::new(lambdas, pis, q)?;
        g.q = g.q_raw.clone();
        Ok(g)
    }

    pub fn from_proportions(props: &SelectionProportionArray, pis: Vec<f64>) -> Result<Self> {
        Self::new(props.lambdas.clone(), pis, props.q.clone())
    }

    pub fn n_lambdas(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n_pis(&self) -> usize {
        self.pis.len()
    }
}
