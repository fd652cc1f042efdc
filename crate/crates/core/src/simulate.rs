//! Ground-truth data generation.
//!
//! Graphical model: an Erdős–Rényi or Barabási–Albert graph gives the support of the
//! precision matrix Ω; nonzero off-diagonal entries are ±1 within a group and ±v_b across
//! groups; the diagonal is the absolute row sum plus `u` (diagonal dominance), with `u`
//! chosen to maximize the number of distinct 3-decimal truncated correlations. Rows are
//! drawn from N(0, Ω⁻¹).
//!
//! Regression: independent standard normal predictors, uniform effects on a random
//! signal set, Gaussian noise scaled to a target explained variance.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{invalid, Error, Result};
use crate::graph::{all_pairs, Adjacency};
use crate::multiblock::BlockStructure;
use crate::rng::{mix_seed, stream};

const STREAM_GRAPH: u64 = 1;
const STREAM_SIGNS: u64 = 2;
const STREAM_SAMPLES: u64 = 3;
const STREAM_SIGNAL_SET: u64 = 4;
const STREAM_EFFECTS: u64 = 5;
const STREAM_NOISE: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Topology {
    ErdosRenyi { nu: f64 },
    ScaleFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub topology: Topology,
    pub p: usize,
    pub seed: u64,
}

impl GraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 3 {
            return invalid(format!("need at least 3 nodes, got {}", self.p));
        }
        if let Topology::ErdosRenyi { nu } = self.topology {
            if !(0.0..=1.0).contains(&nu) {
                return invalid(format!("density must lie in [0, 1], got {nu}"));
            }
        }
        Ok(())
    }
}

/// Each of the p(p−1)/2 pairs is an edge independently with probability `nu`.
pub fn simulate_er_graph(p: usize, nu: f64, seed: u64) -> Result<Adjacency> {
    GraphSpec { topology: Topology::ErdosRenyi { nu }, p, seed }.validate()?;
    let mut rng = stream(seed, STREAM_GRAPH);
    let edges: Vec<(usize, usize)> = all_pairs(p).into_iter().filter(|_| rng.random::<f64>() < nu).collect();
    Ok(Adjacency::from_edges(p, edges))
}

/// Preferential attachment with one edge per arriving node, grown from the edge (0, 1):
/// a tree with p − 1 edges.
pub fn simulate_ba_graph(p: usize, seed: u64) -> Result<Adjacency> {
    GraphSpec { topology: Topology::ScaleFree, p, seed }.validate()?;
    let mut rng = stream(seed, STREAM_GRAPH);
    let mut adj = Adjacency::empty(p);
    adj.set(0, 1, true);
    // every edge contributes both endpoints, so uniform draws are degree-proportional
    let mut endpoints = vec![0usize, 1];
    for node in 2..p {
        let target = endpoints[rng.random_range(0..endpoints.len())];
        adj.set(node, target, true);
        endpoints.push(node);
        endpoints.push(target);
    }
    Ok(adj)
}

/// Off-diagonal precision entries: 0 off the graph, ±1 within a group and ±`v_b`
/// between groups (uniform signs). The diagonal is left at zero.
pub fn fill_precision(theta: &Adjacency, blocks: Option<&BlockStructure>, v_b: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&v_b) {
        return invalid(format!("v_b must lie in [0, 1], got {v_b}"));
    }
    let p = theta.p();
    if let Some(b) = blocks {
        if b.p() != p {
            return Err(Error::Dimension(format!("block structure covers {} nodes, graph has {p}", b.p())));
        }
    }
    let mut rng = stream(seed, STREAM_SIGNS);
    let mut omega = DMatrix::zeros(p, p);
    for (i, j) in theta.edges() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let scale = match blocks {
            Some(b) if b.group_of(i) != b.group_of(j) => v_b,
            _ => 1.0,
        };
        omega[(i, j)] = sign * scale;
        omega[(j, i)] = sign * scale;
    }
    Ok(omega)
}

/// Sets Ωᵢᵢ = Σⱼ|Ωᵢⱼ| + u, ignoring whatever diagonal `offdiag` carries.
pub fn with_dominant_diagonal(offdiag: &DMatrix<f64>, u: f64) -> DMatrix<f64> {
    let p = offdiag.nrows();
    let mut omega = offdiag.clone();
    for i in 0..p {
        let row: f64 = (0..p).filter(|&j| j != i).map(|j| offdiag[(i, j)].abs()).sum();
        omega[(i, i)] = row + u;
    }
    omega
}

/// Number of distinct values among the strict-upper-triangle absolute correlations
/// truncated toward zero to three decimals.
pub fn contrast(corr: &DMatrix<f64>) -> usize {
    let p = corr.nrows();
    let mut seen = HashSet::new();
    for j in 0..p {
        for i in 0..j {
            seen.insert((corr[(i, j)].abs() * 1000.0).trunc() as i64);
        }
    }
    seen.len()
}

pub fn covariance_to_correlation(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let p = sigma.nrows();
    DMatrix::from_fn(p, p, |i, j| sigma[(i, j)] / (sigma[(i, i)] * sigma[(j, j)]).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTuning {
    pub u: f64,
    pub contrast: usize,
}

/// Default candidate grid: 100 log-spaced values on [1e-5, 10].
pub fn default_u_grid() -> Vec<f64> {
    log_spaced(1e-5, 10.0, 100)
}

pub(crate) fn log_spaced(from: f64, to: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![from];
    }
    let (a, b) = (from.ln(), to.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Picks `u` maximizing [`contrast`] of the correlation matrix implied by
/// `with_dominant_diagonal(offdiag, u)`; the first maximum on the ascending grid wins.
pub fn tune_u(offdiag: &DMatrix<f64>, grid: &[f64]) -> Result<UTuning> {
    let mut best: Option<UTuning> = None;
    for &u in grid {
        let omega = with_dominant_diagonal(offdiag, u);
        let Some(chol) = omega.cholesky() else { continue };
        let c = contrast(&covariance_to_correlation(&chol.inverse()));
        if best.is_none_or(|b| c > b.contrast) {
            best = Some(UTuning { u, contrast: c });
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no candidate u gave an invertible precision matrix".into()))
}

/// n i.i.d. rows from N(0, Σ) as `Z Lᵀ` with Σ = L Lᵀ.
pub fn sample_mvn(sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let l = sigma.clone().cholesky().ok_or(Error::Singular)?.unpack();
    let mut rng = stream(seed, STREAM_SAMPLES);
    let mut z = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(z * l.transpose())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedGraphDataset {
    pub x: DesignMatrix,
    pub theta: Adjacency,
    pub omega: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub u: f64,
    pub contrast: usize,
    pub blocks: Option<BlockStructure>,
    pub v_b: f64,
}

/// Graph, precision, tuned `u`, covariance and `n` samples from one seed.
pub fn simulate_graph_dataset(
    spec: &GraphSpec,
    n: usize,
    blocks: Option<&BlockStructure>,
    v_b: f64,
) -> Result<SimulatedGraphDataset> {
    spec.validate()?;
    if n < 2 {
        return invalid("need at least 2 observations");
    }
    let theta = match spec.topology {
        Topology::ErdosRenyi { nu } => simulate_er_graph(spec.p, nu, spec.seed)?,
        Topology::ScaleFree => simulate_ba_graph(spec.p, spec.seed)?,
    };
    let offdiag = fill_precision(&theta, blocks, v_b, spec.seed)?;
    let tuning = tune_u(&offdiag, &default_u_grid())?;
    let omega = with_dominant_diagonal(&offdiag, tuning.u);
    let sigma = omega.clone().cholesky().ok_or(Error::Singular)?.inverse();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let x = sample_mvn(&sigma, n, spec.seed)?;
    Ok(SimulatedGraphDataset {
        x: DesignMatrix::with_default_names(x)?,
        theta,
        omega,
        sigma,
        u: tuning.u,
        contrast: tuning.contrast,
        blocks: blocks.cloned(),
        v_b,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRegressionDataset {
    pub x: DesignMatrix,
    pub y: Vec<f64>,
    pub beta_true: Vec<f64>,
    pub signal_set: Vec<usize>,
    pub sigma_noise: f64,
}

/// Effects smaller than this in magnitude are redrawn.
pub const MIN_EFFECT: f64 = 0.05;

pub fn simulate_regression(
    n: usize,
    p: usize,
    n_signal: usize,
    explained_variance: f64,
    seed: u64,
) -> Result<SimulatedRegressionDataset> {
    if n < 2 || p < 1 {
        return invalid("need n ≥ 2 and p ≥ 1");
    }
    if n_signal < 1 || n_signal > p {
        return invalid(format!("number of signals must lie in [1, {p}], got {n_signal}"));
    }
    if !(explained_variance > 0.0 && explained_variance < 1.0) {
        return invalid(format!("explained variance must lie in (0, 1), got {explained_variance}"));
    }
    let mut rng = stream(seed, STREAM_SAMPLES);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut signal_set = index::sample(&mut stream(seed, STREAM_SIGNAL_SET), p, n_signal).into_vec();
    signal_set.sort_unstable();
    let mut rng = stream(seed, STREAM_EFFECTS);
    let mut beta_true = vec![0.0; p];
    for &j in &signal_set {
        beta_true[j] = loop {
            let b: f64 = rng.random_range(-1.0..=1.0);
            if b.abs() >= MIN_EFFECT {
                break b;
            }
        };
    }
    let signal: Vec<f64> = (0..n).map(|i| (0..p).map(|j| x[(i, j)] * beta_true[j]).sum()).collect();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let var = signal.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma_noise = (var * (1.0 - explained_variance) / explained_variance).sqrt();
    let mut rng = stream(seed, STREAM_NOISE);
    let y = signal.iter().map(|s| s + sigma_noise * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(SimulatedRegressionDataset { x: DesignMatrix::with_default_names(x)?, y, beta_true, signal_set, sigma_noise })
}

/// Seed of dataset `index` in a series generated from `master`.
pub fn dataset_seed(master: u64, index: u64) -> u64 {
    mix_seed(master, index)
}
