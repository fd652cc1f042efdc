//! Graphical LASSO: maximizes `log det Ω − tr(SΩ) − Σᵢⱼ Λᵢⱼ|Ωᵢⱼ|` over positive definite Ω,
//! with a zero-diagonal penalty matrix Λ.
//!
//! The solver works on the covariance estimate W = Ω⁻¹ one column at a time: each column
//! update is a LASSO problem in the remaining variables solved by coordinate descent.
//! Before solving, variables are split into the connected components of the graph
//! `{(i, j) : |Sᵢⱼ| > Λᵢⱼ}`; the solution is block diagonal along these components, so
//! each one is solved on its own and isolated variables are closed-form.
//!
//! A [`GlassoSolver`] keeps W and the column regressions between calls, which makes
//! consecutive fits along a penalty path warm-started.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::covariance::{CovarianceMatrix, Penalty};
use super::{soft_threshold, KktReport};
use crate::error::{invalid, Error, Result};
use crate::graph::{all_pairs, Adjacency};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlassoOptions {
    /// Outer stop: mean absolute change of the off-diagonal of W over one sweep,
    /// relative to the mean absolute off-diagonal of S.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Inner stop: largest weighted coefficient change in a column regression, on the
    /// same relative scale as `tol`.
    pub inner_tol: f64,
    pub max_inner_sweeps: usize,
    /// Off-diagonal entries of Ω with magnitude at or below this are not edges.
    pub support_tolerance: f64,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_sweeps: 1000, inner_tol: 1e-3, max_inner_sweeps: 10_000, support_tolerance: 1e-8 }
    }
}

impl GlassoOptions {
    /// Tight tolerances for when Ω itself matters more than the support
    /// (KKT residuals well below 1e-5 on moderate problems).
    pub fn precise() -> Self {
        Self { tol: 1e-6, inner_tol: 1e-6, max_sweeps: 10_000, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub omega: DMatrix<f64>,
    pub support: Adjacency,
    pub penalty: Penalty,
    pub converged: bool,
    pub sweeps: usize,
}

impl PrecisionEstimate {
    pub fn n_edges(&self) -> usize {
        self.support.n_edges()
    }
}

/// Warm-startable solver bound to one covariance matrix.
pub(crate) struct GlassoSolver<'a> {
    s: &'a DMatrix<f64>,
    p: usize,
    opts: GlassoOptions,
    /// Column-major p×p.
    w: Vec<f64>,
    /// Column j holds the regression coefficients of variable j on the others.
    beta: Vec<f64>,
    outer_threshold: f64,
    inner_threshold: f64,
    /// Penalty of the last solve; the warm state is kept only while penalties do not grow.
    last: Option<Penalty>,
}

impl<'a> GlassoSolver<'a> {
    pub(crate) fn new(s: &'a DMatrix<f64>, opts: GlassoOptions) -> Self {
        let p = s.nrows();
        let n_off = (p * p.saturating_sub(1)) as f64;
        let mut off_sum = 0.0;
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    off_sum += s[(i, j)].abs();
                }
            }
        }
        let mean_off = if n_off > 0.0 { off_sum / n_off } else { 0.0 };
        Self {
            s,
            p,
            opts,
            w: s.as_slice().to_vec(),
            beta: vec![0.0; p * p],
            outer_threshold: opts.tol * mean_off,
            inner_threshold: opts.inner_tol * mean_off,
            last: None,
        }
    }

    fn components(&self, penalty: &Penalty) -> Vec<Vec<usize>> {
        let p = self.p;
        let mut parent: Vec<usize> = (0..p).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for j in 0..p {
            for i in 0..j {
                if self.s[(i, j)].abs() > penalty.value(i, j) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; p];
        for i in 0..p {
            let r = find(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(i);
        }
        groups
    }

    fn reset(&mut self) {
        self.w.copy_from_slice(self.s.as_slice());
        self.beta.fill(0.0);
    }

    /// Warm starts from a sparser penalty are reliable; from a denser one coordinate
    /// descent can stall for thousands of sweeps, so those start cold.
    fn penalty_grew(&self, penalty: &Penalty) -> bool {
        let Some(last) = &self.last else { return false };
        (0..self.p).any(|j| (0..j).any(|i| penalty.value(i, j) > last.value(i, j)))
    }

    /// Solves at `penalty`, returning (Ω, converged, sweeps).
    pub(crate) fn solve(&mut self, penalty: &Penalty) -> (DMatrix<f64>, bool, usize) {
        let warm = self.last.is_some() && !self.penalty_grew(penalty);
        if !warm {
            self.reset();
        }
        self.last = Some(penalty.clone());
        let first = self.solve_from_state(penalty);
        if first.1 || !warm {
            return first;
        }
        // an inexact warm state can lose definiteness and blow up; retry from S
        self.reset();
        let (omega, converged, sweeps) = self.solve_from_state(penalty);
        (omega, converged, first.2 + sweeps)
    }

    fn solve_from_state(&mut self, penalty: &Penalty) -> (DMatrix<f64>, bool, usize) {
        let p = self.p;
        let comps = self.components(penalty);
        let mut label = vec![0usize; p];
        for (c, members) in comps.iter().enumerate() {
            for &i in members {
                label[i] = c;
            }
        }
        // drop couplings between components from the warm state
        for j in 0..p {
            for i in 0..p {
                if label[i] != label[j] {
                    self.w[i + j * p] = 0.0;
                    self.beta[i + j * p] = 0.0;
                }
            }
        }
        let mut omega = DMatrix::zeros(p, p);
        let mut converged = true;
        let mut max_sweeps = 0;
        let mut s_sub = Vec::new();
        let mut l_sub = Vec::new();
        let mut w_sub = Vec::new();
        let mut b_sub = Vec::new();
        for members in &comps {
            let m = members.len();
            if m == 1 {
                let i = members[0];
                let sii = self.s[(i, i)];
                self.w[i + i * p] = sii;
                omega[(i, i)] = 1.0 / sii;
                if !(sii > 0.0) {
                    converged = false;
                }
                continue;
            }
            s_sub.clear();
            l_sub.clear();
            w_sub.clear();
            b_sub.clear();
            for &j in members {
                for &i in members {
                    s_sub.push(self.s[(i, j)]);
                    l_sub.push(penalty.value(i, j));
                    w_sub.push(if i == j { self.s[(i, i)] } else { self.w[i + j * p] });
                    b_sub.push(if i == j { 0.0 } else { self.beta[i + j * p] });
                }
            }
            let (ok, sweeps) = solve_block(
                &s_sub,
                &l_sub,
                &mut w_sub,
                &mut b_sub,
                m,
                self.outer_threshold,
                self.inner_threshold,
                &self.opts,
            );
            converged &= ok;
            max_sweeps = max_sweeps.max(sweeps);
            for (b, &j) in members.iter().enumerate() {
                // Ω_jj = 1 / (W_jj − w_jᵀβ_j), Ω_kj = −β_kj Ω_jj
                let col_w = &w_sub[b * m..(b + 1) * m];
                let col_b = &b_sub[b * m..(b + 1) * m];
                let mut quad = 0.0;
                for a in 0..m {
                    if a != b {
                        quad += col_w[a] * col_b[a];
                    }
                }
                let denom = col_w[b] - quad;
                if !(denom > 0.0) {
                    converged = false;
                }
                let ojj = 1.0 / denom;
                omega[(j, j)] = ojj;
                for (a, &i) in members.iter().enumerate() {
                    self.w[i + j * p] = col_w[a];
                    self.beta[i + j * p] = col_b[a];
                    if a != b {
                        omega[(i, j)] = -col_b[a] * ojj;
                    }
                }
            }
        }
        for j in 0..p {
            for i in 0..j {
                let v = 0.5 * (omega[(i, j)] + omega[(j, i)]);
                omega[(i, j)] = v;
                omega[(j, i)] = v;
            }
        }
        (omega, converged, max_sweeps)
    }

    pub(crate) fn fit(&mut self, penalty: &Penalty) -> PrecisionEstimate {
        let (omega, converged, sweeps) = self.solve(penalty);
        let support = support_of(&omega, self.opts.support_tolerance);
        PrecisionEstimate { omega, support, penalty: penalty.clone(), converged, sweeps }
    }
}

pub(crate) fn support_of(omega: &DMatrix<f64>, tolerance: f64) -> Adjacency {
    let p = omega.nrows();
    Adjacency::from_edges(p, all_pairs(p).into_iter().filter(|&(i, j)| omega[(i, j)].abs() > tolerance))
}

/// Block coordinate descent on one connected component (all buffers m×m, column-major).
#[allow(clippy::too_many_arguments)]
fn solve_block(
    s: &[f64],
    lam: &[f64],
    w: &mut [f64],
    beta: &mut [f64],
    m: usize,
    outer_threshold: f64,
    inner_threshold: f64,
    opts: &GlassoOptions,
) -> (bool, usize) {
    let mut wb = vec![0.0; m];
    let mut active = ActiveSet::default();
    let n_off = (m * (m - 1)) as f64;
    for sweep in 1..=opts.max_sweeps {
        let mut change = 0.0;
        for j in 0..m {
            // wb = W₁₁ β_j, using the current W
            wb.fill(0.0);
            for k in 0..m {
                let bk = beta[k + j * m];
                if bk != 0.0 && k != j {
                    let col = &w[k * m..(k + 1) * m];
                    for (acc, &wk) in wb.iter_mut().zip(col) {
                        *acc += bk * wk;
                    }
                }
            }
            let mut sweeps = 0;
            while sweeps < opts.max_inner_sweeps {
                sweeps += 1;
                let mut dmax: f64 = 0.0;
                for k in 0..m {
                    if k == j {
                        continue;
                    }
                    let wkk = w[k + k * m];
                    let old = beta[k + j * m];
                    let rho = s[k + j * m] - (wb[k] - wkk * old);
                    let new = soft_threshold(rho, lam[k + j * m]) / wkk;
                    if new != old {
                        let d = new - old;
                        beta[k + j * m] = new;
                        let col = &w[k * m..(k + 1) * m];
                        for (acc, &wk) in wb.iter_mut().zip(col) {
                            *acc += d * wk;
                        }
                        dmax = dmax.max(d.abs() * wkk);
                    }
                }
                if !dmax.is_finite() || !wb.iter().all(|v| v.is_finite()) {
                    return (false, sweep);
                }
                if dmax <= inner_threshold {
                    break;
                }
                sweeps += active.sweep(j, m, s, lam, w, beta, &mut wb, inner_threshold, opts.max_inner_sweeps - sweeps.min(opts.max_inner_sweeps));
            }
            for i in 0..m {
                if i != j {
                    change += (wb[i] - w[i + j * m]).abs();
                    w[i + j * m] = wb[i];
                    w[j + i * m] = wb[i];
                }
            }
        }
        if !change.is_finite() {
            return (false, sweep);
        }
        if change / n_off <= outer_threshold {
            return (true, sweep);
        }
    }
    (false, opts.max_sweeps)
}

/// Coordinate descent restricted to the nonzero coefficients of one column, on a
/// contiguous copy of the active submatrix of W.
#[derive(Default)]
struct ActiveSet {
    idx: Vec<usize>,
    w: Vec<f64>,
    wb: Vec<f64>,
    beta: Vec<f64>,
}

impl ActiveSet {
    /// Returns the number of sweeps used; `beta` column `j` and `wb` are updated in place.
    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &mut self,
        j: usize,
        m: usize,
        s: &[f64],
        lam: &[f64],
        w: &[f64],
        beta: &mut [f64],
        wb: &mut [f64],
        threshold: f64,
        budget: usize,
    ) -> usize {
        self.idx.clear();
        self.idx.extend((0..m).filter(|&k| k != j && beta[k + j * m] != 0.0));
        let a = self.idx.len();
        if a == 0 || budget == 0 {
            return 0;
        }
        self.w.clear();
        for &c in &self.idx {
            self.w.extend(self.idx.iter().map(|&r| w[r + c * m]));
        }
        self.wb.clear();
        self.wb.extend(self.idx.iter().map(|&r| wb[r]));
        self.beta.clear();
        self.beta.extend(self.idx.iter().map(|&r| beta[r + j * m]));
        let mut used = 0;
        while used < budget {
            used += 1;
            let mut dmax: f64 = 0.0;
            for b in 0..a {
                let k = self.idx[b];
                let wkk = self.w[b + b * a];
                let old = self.beta[b];
                let rho = s[k + j * m] - (self.wb[b] - wkk * old);
                let new = soft_threshold(rho, lam[k + j * m]) / wkk;
                if new != old {
                    let d = new - old;
                    self.beta[b] = new;
                    let col = &self.w[b * a..(b + 1) * a];
                    for (acc, &wk) in self.wb.iter_mut().zip(col) {
                        *acc += d * wk;
                    }
                    dmax = dmax.max(d.abs() * wkk);
                }
            }
            if dmax <= threshold {
                break;
            }
        }
        for (b, &k) in self.idx.iter().enumerate() {
            let d = self.beta[b] - beta[k + j * m];
            if d != 0.0 {
                beta[k + j * m] = self.beta[b];
                let col = &w[k * m..(k + 1) * m];
                for (acc, &wk) in wb.iter_mut().zip(col) {
                    *acc += d * wk;
                }
            }
        }
        used
    }
}

/// Smallest scalar penalty with an empty graph: `max_{i≠j} |S_ij|`.
pub fn glasso_lambda_max(s: &CovarianceMatrix) -> Result<f64> {
    let p = s.p();
    if p < 2 {
        return invalid("graphical LASSO needs at least 2 variables");
    }
    Ok(max_offdiag(s.values()))
}

pub(crate) fn max_offdiag(s: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    let mut best: f64 = 0.0;
    for j in 0..p {
        for i in 0..j {
            best = best.max(s[(i, j)].abs());
        }
    }
    best
}

fn validate(s: &CovarianceMatrix, penalties: &[Penalty]) -> Result<()> {
    if s.p() < 2 {
        return invalid("graphical LASSO needs at least 2 variables");
    }
    for pen in penalties {
        pen.validate(s.p())?;
    }
    s.check_psd()
}

pub fn fit_glasso(s: &CovarianceMatrix, penalty: &Penalty, opts: &GlassoOptions) -> Result<PrecisionEstimate> {
    validate(s, std::slice::from_ref(penalty))?;
    Ok(GlassoSolver::new(s.values(), *opts).fit(penalty))
}

/// Fits a sequence of penalties, each warm-started from the previous solution.
pub fn glasso_path(s: &CovarianceMatrix, penalties: &[Penalty], opts: &GlassoOptions) -> Result<Vec<PrecisionEstimate>> {
    validate(s, penalties)?;
    let mut solver = GlassoSolver::new(s.values(), *opts);
    Ok(penalties.iter().map(|pen| solver.fit(pen)).collect())
}

/// Checks the stationarity conditions `W − S − Λ∘Γ = 0` with `W = Ω⁻¹` and Γ a
/// subgradient of `|Ω|`: equality with `sign(Ωᵢⱼ)` on the support, `|Wᵢⱼ − Sᵢⱼ| ≤ Λᵢⱼ`
/// off it, and `Wᵢᵢ = Sᵢᵢ` on the diagonal.
pub fn check_kkt_glasso(s: &CovarianceMatrix, penalty: &Penalty, est: &PrecisionEstimate, tol: f64) -> Result<KktReport> {
    let p = s.p();
    penalty.validate(p)?;
    if est.omega.nrows() != p {
        return Err(Error::Dimension("estimate does not match the covariance".into()));
    }
    let w = est.omega.clone().cholesky().ok_or(Error::Singular)?.inverse();
    let sv = s.values();
    let mut worst: f64 = 0.0;
    for j in 0..p {
        worst = worst.max((w[(j, j)] - sv[(j, j)]).abs());
        for i in 0..j {
            let lam = penalty.value(i, j);
            let gap = w[(i, j)] - sv[(i, j)];
            let r = if est.support.get(i, j) {
                (gap - lam * est.omega[(i, j)].signum()).abs()
            } else {
                (gap.abs() - lam).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    Ok(KktReport::new(worst, tol))
}
