use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::BlockStructure;
use crate::data::DesignMatrix;
use crate::error::{invalid, Error, Result};
use crate::graph::edge_pair;
use crate::parallel::Execution;
use crate::resampling::{grouped_selection_proportions, GlassoSelector, ResamplingPlan, SelectionProportionArray};
use crate::solvers::glasso::GlassoSolver;
use crate::solvers::{CovarianceMatrix, GlassoOptions, Penalty, PenaltyMatrix};
use crate::stability::grid::{grid_by_density, LambdaGrid};
use crate::stability::score::Threshold;
use crate::stability::surface::{check_eta, result_at, score_row};
use crate::stability::{calibrate, score_surface, CalibrationGrid, CalibrationResult, PferMethod, StabilityScoreSurface};

/// Default weak penalty on the blocks not being calibrated.
pub const DEFAULT_LAMBDA0: f64 = 0.1;
/// Largest joint grid accepted by [`calibrate_multiparameter`].
pub const MAX_JOINT_CELLS: usize = 1_000_000;

/// Penalty matrix with entry (i, j) equal to the penalty of the block of (i, j).
pub fn assemble_penalty(blocks: &BlockStructure, lambdas: &[f64]) -> Result<PenaltyMatrix> {
    if lambdas.len() != blocks.n_blocks() {
        return Err(Error::Dimension(format!("{} penalties for {} blocks", lambdas.len(), blocks.n_blocks())));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return invalid("block penalties must be finite and nonnegative");
    }
    let p = blocks.p();
    PenaltyMatrix::new(DMatrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { lambdas[blocks.block_of(i, j)] }))
}

fn block_penalty(blocks: &BlockStructure, b: usize, lambda_b: f64, lambda0: f64) -> Result<Penalty> {
    if blocks.n_blocks() == 1 {
        return Ok(Penalty::Scalar(lambda_b));
    }
    let mut v = vec![lambda0; blocks.n_blocks()];
    v[b] = lambda_b;
    Ok(Penalty::Matrix(assemble_penalty(blocks, &v)?))
}

fn check_structure(blocks: &BlockStructure, p: usize) -> Result<()> {
    if blocks.p() != p {
        return Err(Error::Dimension(format!("block structure covers {} variables, data has {p}", blocks.p())));
    }
    Ok(())
}

/// Largest |S_ij| over the pairs of block `b`.
pub fn block_lambda_max(s: &CovarianceMatrix, blocks: &BlockStructure, b: usize) -> Result<f64> {
    check_structure(blocks, s.p())?;
    let p = s.p();
    Ok(blocks.block_edges(b).into_iter().map(|e| {
        let (i, j) = edge_pair(e, p);
        s.values()[(i, j)].abs()
    }).fold(0.0, f64::max))
}

/// Grid for block `b` with every other block penalized by `lambda0`: from the block's
/// largest |S_ij| down to the largest penalty giving at least half of the block's
/// pairs as edges.
pub fn block_lambda_grid(
    s: &CovarianceMatrix,
    blocks: &BlockStructure,
    b: usize,
    lambda0: f64,
    l: usize,
    opts: &GlassoOptions,
) -> Result<LambdaGrid> {
    s.check_psd()?;
    let lmax = block_lambda_max(s, blocks, b)?;
    let p = s.p();
    let edges: Vec<(usize, usize)> = blocks.block_edges(b).into_iter().map(|e| edge_pair(e, p)).collect();
    let size = edges.len() as f64;
    let tol = opts.support_tolerance;
    grid_by_density(lmax, l, |lambda| {
        let pen = block_penalty(blocks, b, lambda, lambda0)?;
        let (omega, _, _) = GlassoSolver::new(s.values(), *opts).solve(&pen);
        Ok(edges.iter().filter(|&&(i, j)| omega[(i, j)].abs() > tol).count() as f64 / size)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBlockSettings {
    pub pis: Vec<f64>,
    pub plan: ResamplingPlan,
    pub pfer_method: PferMethod,
    /// Overall PFER budget, shared between blocks in proportion to their sizes.
    pub eta: Option<f64>,
    pub glasso: GlassoOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCalibration {
    pub block: usize,
    pub label: String,
    /// Canonical indices of the block's edges; features of this block are positions in it.
    pub edges: Vec<usize>,
    pub eta: Option<f64>,
    pub surface: StabilityScoreSurface,
    pub result: CalibrationResult,
    /// Block selection counts along the block's grid (in joint mode, along the slice
    /// through the chosen penalties of the other blocks).
    pub proportions: SelectionProportionArray,
}

impl BlockCalibration {
    pub fn selected_edges(&self) -> Vec<usize> {
        self.result.selected.iter().map(|&f| self.edges[f]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBlockResult {
    /// Weak penalty used on the other blocks (block-wise calibration only).
    pub lambda0: Option<f64>,
    pub blocks: Vec<BlockCalibration>,
    /// Union of the blocks' stable edges, canonical indices ascending.
    pub selected: Vec<usize>,
    /// Sum of the per-block PFER bounds.
    pub pfer: f64,
}

fn block_eta(eta: Option<f64>, blocks: &BlockStructure, b: usize) -> Option<f64> {
    let total: usize = blocks.block_sizes().iter().sum();
    eta.map(|e| e * blocks.block_sizes()[b] as f64 / total as f64)
}

fn assemble_result(lambda0: Option<f64>, blocks: Vec<BlockCalibration>) -> MultiBlockResult {
    let mut selected: Vec<usize> = blocks.iter().flat_map(|b| b.selected_edges()).collect();
    selected.sort_unstable();
    let pfer = blocks.iter().map(|b| b.result.pfer_bound).sum();
    MultiBlockResult { lambda0, blocks, selected, pfer }
}

fn check_settings(x: &DesignMatrix, blocks: &BlockStructure, grids: &[Vec<f64>], settings: &MultiBlockSettings) -> Result<()> {
    check_structure(blocks, x.p())?;
    if grids.len() != blocks.n_blocks() {
        return Err(Error::Dimension(format!("{} grids for {} blocks", grids.len(), blocks.n_blocks())));
    }
    check_eta(settings.eta)?;
    settings.plan.validate(x.n())
}

/// Block-wise calibration: block `b` is fitted along its own grid with every other
/// block penalized by `lambda0`, and scored on its own edges only.
pub fn calibrate_blockwise(
    x: &DesignMatrix,
    blocks: &BlockStructure,
    lambda0: f64,
    grids: &[Vec<f64>],
    settings: &MultiBlockSettings,
    exec: Execution,
) -> Result<MultiBlockResult> {
    check_settings(x, blocks, grids, settings)?;
    if !(lambda0 >= 0.0 && lambda0.is_finite()) {
        return invalid(format!("lambda0 must be finite and nonnegative, got {lambda0}"));
    }
    let mut out = Vec::with_capacity(blocks.n_blocks());
    for (b, grid) in grids.iter().enumerate() {
        let calib = (|| {
            let penalties = grid.iter().map(|&l| block_penalty(blocks, b, l, lambda0)).collect::<Result<Vec<_>>>()?;
            let edges = blocks.block_edges(b);
            let selector = GlassoSelector::new(x, penalties, grid.clone(), Some(&edges), settings.glasso)?;
            let all: Vec<usize> = (0..edges.len()).collect();
            let props = grouped_selection_proportions(&selector, &settings.plan, exec, &[all])?.remove(0);
            let cgrid = CalibrationGrid::from_proportions(&props, settings.pis.clone())?;
            let eta = block_eta(settings.eta, blocks, b);
            let surface = score_surface(&props, &cgrid, settings.pfer_method, eta)?;
            let result = calibrate(&surface, &cgrid, &props)?;
            Ok(BlockCalibration { block: b, label: blocks.block_label(b), edges, eta, surface, result, proportions: props })
        })()
        .map_err(|e: Error| Error::Block { block: blocks.block_label(b), source: Box::new(e) })?;
        out.push(calib);
    }
    Ok(assemble_result(Some(lambda0), out))
}

/// Joint calibration over the product of the block grids. At every joint penalty the
/// score is the sum of the block scores, each maximized over its own threshold.
pub fn calibrate_multiparameter(
    x: &DesignMatrix,
    blocks: &BlockStructure,
    grids: &[Vec<f64>],
    settings: &MultiBlockSettings,
    exec: Execution,
) -> Result<MultiBlockResult> {
    check_settings(x, blocks, grids, settings)?;
    let nb = blocks.n_blocks();
    let mut cells: usize = 1;
    for g in grids {
        if g.is_empty() {
            return invalid("empty block grid");
        }
        cells = cells.saturating_mul(g.len());
    }
    if cells > MAX_JOINT_CELLS {
        return Err(Error::GridTooLarge { cells, limit: MAX_JOINT_CELLS });
    }
    // mixed radix, block 0 slowest
    let index_of = |mut c: usize| -> Vec<usize> {
        let mut idx = vec![0; nb];
        for b in (0..nb).rev() {
            idx[b] = c % grids[b].len();
            c /= grids[b].len();
        }
        idx
    };
    let cell_of = |idx: &[usize]| idx.iter().zip(grids).fold(0, |c, (&i, g)| c * g.len() + i);
    let penalties = (0..cells)
        .map(|c| {
            let idx = index_of(c);
            let lambdas: Vec<f64> = (0..nb).map(|b| grids[b][idx[b]]).collect();
            if nb == 1 {
                Ok(Penalty::Scalar(lambdas[0]))
            } else {
                Ok(Penalty::Matrix(assemble_penalty(blocks, &lambdas)?))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<f64> = (0..cells).map(|c| (cells - c) as f64).collect();
    let selector = GlassoSelector::new(x, penalties, labels, None, settings.glasso)?;
    let edge_lists: Vec<Vec<usize>> = (0..nb).map(|b| blocks.block_edges(b)).collect();
    let props = grouped_selection_proportions(&selector, &settings.plan, exec, &edge_lists)?;
    let thresholds = settings.pis.iter().map(|&p| Threshold::new(p)).collect::<Result<Vec<_>>>()?;
    let k = settings.plan.k_effective();
    let etas: Vec<Option<f64>> = (0..nb).map(|b| block_eta(settings.eta, blocks, b)).collect();

    // best threshold per block and cell: (score, threshold index) or None when infeasible
    let best_pi = |b: usize, c: usize| -> Option<(f64, usize)> {
        let pb = &props[b];
        let row = score_row(pb.counts_at(c), k, pb.q[c], &settings.pis, &thresholds, settings.pfer_method, etas[b]);
        let mut best: Option<(f64, usize)> = None;
        for m in (0..settings.pis.len()).rev() {
            let s = row.score[m];
            if row.feasible[m] && s.is_finite() && best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, m));
            }
        }
        best
    };
    let mut winner: Option<(f64, usize, Vec<usize>)> = None;
    for c in 0..cells {
        let per: Option<Vec<(f64, usize)>> = (0..nb).map(|b| best_pi(b, c)).collect();
        if let Some(per) = per {
            let total: f64 = per.iter().map(|p| p.0).sum();
            if winner.as_ref().is_none_or(|w| total > w.0) {
                winner = Some((total, c, per.iter().map(|p| p.1).collect()));
            }
        }
    }
    let (_, cell, pi_idx) = winner.ok_or(Error::NoFeasibleCell)?;
    let best = index_of(cell);

    let mut out = Vec::with_capacity(nb);
    for b in 0..nb {
        // slice of the joint grid along block b, other blocks at their chosen penalties
        let slice: Vec<usize> = (0..grids[b].len())
            .map(|i| {
                let mut idx = best.clone();
                idx[b] = i;
                cell_of(&idx)
            })
            .collect();
        let pb = &props[b];
        let sliced = SelectionProportionArray {
            lambdas: grids[b].clone(),
            n_features: pb.n_features,
            k_effective: pb.k_effective,
            kind: pb.kind,
            counts: slice.iter().flat_map(|&c| pb.counts_at(c).iter().copied()).collect(),
            q: slice.iter().map(|&c| pb.q[c]).collect(),
        };
        let calib = (|| {
            let cgrid = CalibrationGrid::unregularized(grids[b].clone(), settings.pis.clone(), sliced.q.clone())?;
            let surface = score_surface(&sliced, &cgrid, settings.pfer_method, etas[b])?;
            let result = result_at(&surface, &sliced, best[b], pi_idx[b])?;
            Ok(BlockCalibration {
                block: b,
                label: blocks.block_label(b),
                edges: edge_lists[b].clone(),
                eta: etas[b],
                surface,
                result,
                proportions: sliced.clone(),
            })
        })()
        .map_err(|e: Error| Error::Block { block: blocks.block_label(b), source: Box::new(e) })?;
        out.push(calib);
    }
    Ok(assemble_result(None, out))
}
