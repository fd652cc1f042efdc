//! Resampling plans and selection counts.
//!
//! Every iteration draws its rows from its own RNG stream derived from
//! `(master_seed, k)`, so iterations can run in any order or in parallel and the
//! aggregated integer counts never change.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{invalid, Error, Result};
use crate::graph::edge_pair;
use crate::parallel::{try_map_indexed, Execution};
use crate::rng::stream;
use crate::solvers::covariance::correlation_of_rows;
use crate::solvers::glasso::GlassoSolver;
use crate::solvers::lasso::Standardized;
use crate::solvers::{GlassoOptions, LassoOptions, Penalty};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scheme {
    Subsample { tau: f64 },
    ComplementaryPairs,
    Bootstrap,
}

/// What `k` counts under complementary pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCounting {
    /// `k` pairs, 2k half-sample fits, denominator k.
    #[default]
    Pairs,
    /// `k` half-sample fits forming k/2 pairs, denominator k/2.
    HalfFits,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResamplingPlan {
    pub scheme: Scheme,
    pub k: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub pair_counting: PairCounting,
}

impl ResamplingPlan {
    pub fn complementary_pairs(k: usize, master_seed: u64) -> Self {
        Self { scheme: Scheme::ComplementaryPairs, k, master_seed, pair_counting: PairCounting::Pairs }
    }

    pub fn subsample(tau: f64, k: usize, master_seed: u64) -> Self {
        Self { scheme: Scheme::Subsample { tau }, k, master_seed, pair_counting: PairCounting::Pairs }
    }

    pub fn bootstrap(k: usize, master_seed: u64) -> Self {
        Self { scheme: Scheme::Bootstrap, k, master_seed, pair_counting: PairCounting::Pairs }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k < 2 {
            return invalid(format!("need at least 2 resampling iterations, got {}", self.k));
        }
        if n < 4 {
            return invalid(format!("need at least 4 observations to resample, got {n}"));
        }
        match self.scheme {
            Scheme::Subsample { tau } => {
                if !(tau > 0.0 && tau < 1.0) {
                    return invalid(format!("subsample fraction must lie in (0, 1), got {tau}"));
                }
                if ((tau * n as f64).floor() as usize) < 2 {
                    return invalid(format!("subsample fraction {tau} leaves fewer than 2 of {n} rows"));
                }
            }
            Scheme::ComplementaryPairs => {
                if self.pair_counting == PairCounting::HalfFits && !self.k.is_multiple_of(2) {
                    return invalid("counting half-sample fits needs an even number of iterations");
                }
            }
            Scheme::Bootstrap => {}
        }
        Ok(())
    }

    /// Number of independent draws (pairs count once).
    pub fn n_draws(&self) -> usize {
        match (self.scheme, self.pair_counting) {
            (Scheme::ComplementaryPairs, PairCounting::HalfFits) => self.k / 2,
            _ => self.k,
        }
    }

    /// Denominator of the selection proportions.
    pub fn k_effective(&self) -> usize {
        self.n_draws()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Draw {
    Rows(Vec<usize>),
    Pair(Vec<usize>, Vec<usize>),
}

/// Rows used by draw `k` (1-based). Complementary pairs split a random permutation into
/// halves of sizes ⌊n/2⌋ and ⌈n/2⌉; indices within each part are sorted.
pub fn draw_indices(plan: &ResamplingPlan, k: usize, n: usize) -> Result<Draw> {
    plan.validate(n)?;
    if k == 0 || k > plan.n_draws() {
        return invalid(format!("iteration {k} outside 1..={}", plan.n_draws()));
    }
    let mut rng = stream(plan.master_seed, k as u64);
    Ok(match plan.scheme {
        Scheme::Subsample { tau } => {
            let m = (tau * n as f64).floor() as usize;
            let mut rows = index::sample(&mut rng, n, m).into_vec();
            rows.sort_unstable();
            Draw::Rows(rows)
        }
        Scheme::ComplementaryPairs => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut second = perm.split_off(n / 2);
            perm.sort_unstable();
            second.sort_unstable();
            Draw::Pair(perm, second)
        }
        Scheme::Bootstrap => {
            let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            rows.sort_unstable();
            Draw::Rows(rows)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Variable,
    Edge,
}

/// A penalized feature selector evaluated along a fixed penalty grid.
pub trait Selector: Sync {
    fn n_observations(&self) -> usize;
    fn n_features(&self) -> usize;
    fn kind(&self) -> FeatureKind;
    /// Penalty labels of the grid, one per row of the selection matrix.
    fn lambdas(&self) -> Vec<f64>;
    /// Row-major `n_lambdas × n_features` selection indicators for a fit on `rows`.
    fn select(&self, rows: &[usize]) -> Result<Vec<bool>>;
}

/// LASSO selection of variables. The penalty is per full-data observation count:
/// a fit on m rows uses λ·m/n, so that subsample fits and full-data fits penalize alike.
pub struct LassoSelector<'a> {
    x: &'a DesignMatrix,
    y: &'a [f64],
    lambdas: Vec<f64>,
    opts: LassoOptions,
}

impl<'a> LassoSelector<'a> {
    pub fn new(x: &'a DesignMatrix, y: &'a [f64], lambdas: &[f64], opts: LassoOptions) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::Dimension(format!("y has {} entries for {} rows", y.len(), x.n())));
        }
        check_descending(lambdas)?;
        Ok(Self { x, y, lambdas: lambdas.to_vec(), opts })
    }
}

impl Selector for LassoSelector<'_> {
    fn n_observations(&self) -> usize {
        self.x.n()
    }
    fn n_features(&self) -> usize {
        self.x.p()
    }
    fn kind(&self) -> FeatureKind {
        FeatureKind::Variable
    }
    fn lambdas(&self) -> Vec<f64> {
        self.lambdas.clone()
    }
    fn select(&self, rows: &[usize]) -> Result<Vec<bool>> {
        let scale = rows.len() as f64 / self.x.n() as f64;
        let scaled: Vec<f64> = self.lambdas.iter().map(|l| l * scale).collect();
        let st = Standardized::new(self.x.values(), self.y, rows, Some(self.x.names()));
        let mut out = Vec::with_capacity(self.lambdas.len() * self.x.p());
        for fit in st.path(&scaled, &self.opts) {
            out.extend(fit.coefficients.iter().map(|&b| b != 0.0));
        }
        Ok(out)
    }
}

/// Graphical LASSO selection of edges on the correlation matrix of the rows, along a
/// grid of (scalar or matrix) penalties, optionally restricted to a subset of edges.
pub struct GlassoSelector<'a> {
    x: &'a DesignMatrix,
    penalties: Vec<Penalty>,
    labels: Vec<f64>,
    edges: Vec<(usize, usize)>,
    opts: GlassoOptions,
}

impl<'a> GlassoSelector<'a> {
    /// `labels` name the grid points; `edges` are canonical edge indices
    /// (all edges when `None`).
    pub fn new(
        x: &'a DesignMatrix,
        penalties: Vec<Penalty>,
        labels: Vec<f64>,
        edges: Option<&[usize]>,
        opts: GlassoOptions,
    ) -> Result<Self> {
        let p = x.p();
        if p < 2 {
            return invalid("graphical models need at least 2 variables");
        }
        if penalties.is_empty() || labels.len() != penalties.len() {
            return invalid("need one label per penalty and at least one penalty");
        }
        for pen in &penalties {
            pen.validate(p)?;
        }
        let total = p * (p - 1) / 2;
        let edges = match edges {
            Some(e) => {
                if let Some(&bad) = e.iter().find(|&&i| i >= total) {
                    return invalid(format!("edge index {bad} out of range for {p} variables"));
                }
                e.iter().map(|&i| edge_pair(i, p)).collect()
            }
            None => (0..total).map(|i| edge_pair(i, p)).collect(),
        };
        Ok(Self { x, penalties, labels, edges, opts })
    }

    /// Scalar penalties, all edges.
    pub fn scalar(x: &'a DesignMatrix, lambdas: &[f64], opts: GlassoOptions) -> Result<Self> {
        check_descending(lambdas)?;
        Self::new(x, lambdas.iter().map(|&l| Penalty::Scalar(l)).collect(), lambdas.to_vec(), None, opts)
    }
}

impl Selector for GlassoSelector<'_> {
    fn n_observations(&self) -> usize {
        self.x.n()
    }
    fn n_features(&self) -> usize {
        self.edges.len()
    }
    fn kind(&self) -> FeatureKind {
        FeatureKind::Edge
    }
    fn lambdas(&self) -> Vec<f64> {
        self.labels.clone()
    }
    fn select(&self, rows: &[usize]) -> Result<Vec<bool>> {
        let s = correlation_of_rows(self.x.values(), rows, self.x.names())?;
        let mut solver = GlassoSolver::new(&s, self.opts);
        let tol = self.opts.support_tolerance;
        let mut out = Vec::with_capacity(self.penalties.len() * self.edges.len());
        for pen in &self.penalties {
            let (omega, _, _) = solver.solve(pen);
            out.extend(self.edges.iter().map(|&(i, j)| omega[(i, j)].abs() > tol));
        }
        Ok(out)
    }
}

fn check_descending(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return invalid("empty penalty grid");
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return invalid("penalties must be finite and nonnegative");
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("penalty grid must be strictly descending");
    }
    Ok(())
}

/// Resampled selection counts: `counts[l * n_features + j]` is the number of draws in
/// which feature `j` was selected at grid point `l` (on both halves, for pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProportionArray {
    pub lambdas: Vec<f64>,
    pub n_features: usize,
    pub k_effective: usize,
    pub kind: FeatureKind,
    pub counts: Vec<u32>,
    /// Mean number of selected features per fitted model, per grid point.
    pub q: Vec<f64>,
}

impl SelectionProportionArray {
    pub fn n_lambdas(&self) -> usize {
        self.lambdas.len()
    }

    pub fn counts_at(&self, l: usize) -> &[u32] {
        &self.counts[l * self.n_features..(l + 1) * self.n_features]
    }

    pub fn proportion(&self, l: usize, j: usize) -> f64 {
        self.counts[l * self.n_features + j] as f64 / self.k_effective as f64
    }

    pub fn proportions_at(&self, l: usize) -> Vec<f64> {
        self.counts_at(l).iter().map(|&c| c as f64 / self.k_effective as f64).collect()
    }
}

struct DrawOutcome {
    selected: Vec<bool>,
    /// Total selections over the fits of this draw, per group and grid point.
    sizes: Vec<u64>,
}

/// Runs the selector on every draw of the plan and aggregates the counts.
pub fn selection_proportions<S: Selector + ?Sized>(
    selector: &S,
    plan: &ResamplingPlan,
    exec: Execution,
) -> Result<SelectionProportionArray> {
    let all: Vec<usize> = (0..selector.n_features()).collect();
    Ok(grouped_selection_proportions(selector, plan, exec, &[all])?.remove(0))
}

/// Like [`selection_proportions`], with the features split into `groups` (lists of
/// feature indices); each group gets its own counts and its own average model size.
pub fn grouped_selection_proportions<S: Selector + ?Sized>(
    selector: &S,
    plan: &ResamplingPlan,
    exec: Execution,
    groups: &[Vec<usize>],
) -> Result<Vec<SelectionProportionArray>> {
    let n = selector.n_observations();
    plan.validate(n)?;
    let lambdas = selector.lambdas();
    let (l, nf) = (lambdas.len(), selector.n_features());
    if let Some(&bad) = groups.iter().flatten().find(|&&j| j >= nf) {
        return invalid(format!("feature {bad} outside 0..{nf}"));
    }
    let ng = groups.len();
    let sizes_of = |sel: &[bool]| -> Vec<u64> {
        let mut out = Vec::with_capacity(ng * l);
        for g in groups {
            out.extend((0..l).map(|a| g.iter().filter(|&&j| sel[a * nf + j]).count() as u64));
        }
        out
    };
    let fit = |k: usize, rows: &[usize]| {
        let sel = selector.select(rows).map_err(|e| Error::Selector { iteration: k, source: Box::new(e) })?;
        if sel.len() != l * nf {
            return Err(Error::Dimension(format!("selector returned {} indicators, expected {}", sel.len(), l * nf)));
        }
        Ok(sel)
    };
    let draws = plan.n_draws();
    let outcomes = try_map_indexed(exec, draws, |i| -> Result<DrawOutcome> {
        let k = i + 1;
        match draw_indices(plan, k, n)? {
            Draw::Rows(rows) => {
                let selected = fit(k, &rows)?;
                let sizes = sizes_of(&selected);
                Ok(DrawOutcome { selected, sizes })
            }
            Draw::Pair(a, b) => {
                let sa = fit(k, &a)?;
                let sb = fit(k, &b)?;
                let sizes = sizes_of(&sa).iter().zip(sizes_of(&sb)).map(|(x, y)| x + y).collect();
                let selected = sa.iter().zip(&sb).map(|(&x, &y)| x && y).collect();
                Ok(DrawOutcome { selected, sizes })
            }
        }
    })?;
    let mut counts = vec![0u32; l * nf];
    let mut totals = vec![0u64; ng * l];
    for o in &outcomes {
        for (c, &s) in counts.iter_mut().zip(&o.selected) {
            *c += s as u32;
        }
        for (t, &s) in totals.iter_mut().zip(&o.sizes) {
            *t += s;
        }
    }
    let fits = match plan.scheme {
        Scheme::ComplementaryPairs => 2 * draws,
        _ => draws,
    } as f64;
    Ok(groups
        .iter()
        .enumerate()
        .map(|(gi, g)| SelectionProportionArray {
            lambdas: lambdas.clone(),
            n_features: g.len(),
            k_effective: plan.k_effective(),
            kind: selector.kind(),
            counts: (0..l).flat_map(|a| g.iter().map(move |&j| (a, j))).map(|(a, j)| counts[a * nf + j]).collect(),
            q: totals[gi * l..(gi + 1) * l].iter().map(|&t| t as f64 / fits).collect(),
        })
        .collect())
}
