//! Multi-dataset comparison of calibration methods on simulated graphs.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use stabsel::graph::{edge_index, n_pairs};
use stabsel::io::format_float;
use stabsel::metrics::{confusion, precision_recall_f1};
use stabsel::multiblock::{
    block_lambda_grid, calibrate_blockwise, calibrate_multiparameter, BlockStructure, MultiBlockSettings, DEFAULT_LAMBDA0,
};
use stabsel::parallel::map_indexed;
use stabsel::resampling::{selection_proportions, GlassoSelector, PairCounting, ResamplingPlan, Scheme, SelectionProportionArray};
use stabsel::rng::mix_seed;
use stabsel::simulate::{dataset_seed, simulate_graph_dataset, GraphSpec, SimulatedGraphDataset, Topology};
use stabsel::solvers::{empirical_covariance, CovarianceMatrix, GlassoOptions};
use stabsel::stability::{
    build_pi_grid, calibrate, calibrate_error_control, glasso_lambda_grid, information_criteria, score_surface, CalibrationGrid,
    Criterion, PferMethod,
};
use stabsel::{Error, Execution, Result};

use crate::method::Method;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub topology: Topology,
    pub p: usize,
    pub n: usize,
    /// Variable group sizes; enables block-wise scoring and the multi-block methods.
    pub groups: Option<Vec<usize>>,
    pub v_b: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { topology: Topology::ErdosRenyi { nu: 0.02 }, p: 100, n: 200, groups: None, v_b: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub datasets: usize,
    pub seed: u64,
    pub simulation: SimulationConfig,
    pub methods: Vec<Method>,
    pub n_lambdas: usize,
    pub n_pis: usize,
    pub scheme: Scheme,
    pub k: usize,
    pub pair_counting: PairCounting,
    /// Grid length per block for block-wise calibration.
    pub lambdas_per_block: usize,
    /// Grid length per block for joint calibration (the joint grid is its B-th power).
    pub joint_lambdas_per_block: usize,
    /// PFER bound and budget used by the single-block and multi-block methods.
    pub multiblock_pfer_method: PferMethod,
    pub multiblock_eta: Option<f64>,
    pub glasso: GlassoOptions,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            datasets: 100,
            seed: 1,
            simulation: SimulationConfig::default(),
            methods: vec![
                Method::ScoreUnconstrained,
                Method::ScoreConstrained { pfer_method: PferMethod::Ss, eta: 20.0 },
                Method::Bic,
                Method::Ebic { gamma: stabsel::stability::DEFAULT_EBIC_GAMMA },
            ],
            n_lambdas: 50,
            n_pis: 31,
            scheme: Scheme::ComplementaryPairs,
            k: 100,
            pair_counting: PairCounting::default(),
            lambdas_per_block: 30,
            joint_lambdas_per_block: 5,
            multiblock_pfer_method: PferMethod::Mb,
            multiblock_eta: None,
            glasso: GlassoOptions::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn blocks(&self) -> Result<Option<BlockStructure>> {
        self.simulation.groups.as_deref().map(BlockStructure::new).transpose()
    }

    pub fn plan(&self, dataset_seed: u64) -> ResamplingPlan {
        ResamplingPlan { scheme: self.scheme, k: self.k, master_seed: mix_seed(dataset_seed, 0x5eed), pair_counting: self.pair_counting }
    }

    pub fn validate(&self) -> Result<()> {
        let sim = &self.simulation;
        GraphSpec { topology: sim.topology, p: sim.p, seed: 0 }.validate()?;
        let bad = |m: String| Err(Error::InvalidInput(m));
        if let Some(groups) = &sim.groups {
            let blocks = BlockStructure::new(groups)?;
            if blocks.p() != sim.p {
                return bad(format!("group sizes sum to {}, p is {}", blocks.p(), sim.p));
            }
        }
        if !(sim.v_b > 0.0 && sim.v_b <= 1.0) {
            return bad(format!("v_b must lie in (0, 1], got {}", sim.v_b));
        }
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        for m in &self.methods {
            m.validate().map_err(Error::InvalidInput)?;
            if m.needs_blocks() && sim.groups.is_none() {
                return bad(format!("method `{m}` needs variable groups"));
            }
        }
        if self.n_lambdas < 2 || self.lambdas_per_block < 2 || self.joint_lambdas_per_block < 2 {
            return bad("penalty grids need at least 2 values".into());
        }
        build_pi_grid(self.n_pis)?;
        if let Some(eta) = self.multiblock_eta {
            if !(eta > 0.0) {
                return bad(format!("PFER budget must be positive, got {eta}"));
            }
        }
        self.plan(0).validate(sim.n)
    }
}

/// One (dataset, method, scope) line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub dataset: usize,
    pub seed: u64,
    pub method: String,
    /// `overall`, or a block label such as `between_1_2`.
    pub scope: String,
    /// `ok`, or the error that stopped the method.
    pub status: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Wall time of the method on this dataset, shared preprocessing included. Not in the TSV.
    pub seconds: f64,
}

impl BenchmarkRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const TSV_HEADER: &str = "dataset\tseed\tmethod\tscope\tstatus\ttp\tfp\tfn\tprecision\trecall\tf1\n";

/// Rows without timings, so that reruns produce identical bytes.
pub fn write_rows_tsv<W: Write>(mut w: W, rows: &[BenchmarkRow]) -> std::io::Result<()> {
    w.write_all(TSV_HEADER.as_bytes())?;
    for r in rows {
        let status = r.status.replace(['\t', '\n', '\r'], " ");
        if r.is_ok() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.dataset,
                r.seed,
                r.method,
                r.scope,
                status,
                r.tp,
                r.fp,
                r.fn_,
                format_float(r.precision),
                format_float(r.recall),
                format_float(r.f1)
            )?;
        } else {
            writeln!(w, "{}\t{}\t{}\t{}\t{}\tNA\tNA\tNA\tNA\tNA\tNA", r.dataset, r.seed, r.method, r.scope, status)?;
        }
    }
    Ok(())
}

/// Shared per-dataset state: the simulated data and, computed on first use, the
/// single-block penalty grid and selection proportions.
pub struct PreparedDataset {
    pub index: usize,
    pub seed: u64,
    pub data: SimulatedGraphDataset,
    pub s: CovarianceMatrix,
    pub truth: Vec<usize>,
    single: Option<(CalibrationGrid, SelectionProportionArray, f64)>,
}

impl PreparedDataset {
    pub fn new(config: &BenchmarkConfig, index: usize) -> Result<Self> {
        let seed = dataset_seed(config.seed, index as u64);
        let sim = &config.simulation;
        let blocks = config.blocks()?;
        let spec = GraphSpec { topology: sim.topology, p: sim.p, seed };
        let data = simulate_graph_dataset(&spec, sim.n, blocks.as_ref(), sim.v_b)?;
        let s = empirical_covariance(&data.x)?;
        let truth = data.theta.edges().iter().map(|&(i, j)| edge_index(i, j, sim.p)).collect();
        Ok(Self { index, seed, data, s, truth, single: None })
    }

    /// Single-block grid and proportions, with the seconds spent computing them.
    pub fn single_block(&mut self, config: &BenchmarkConfig, exec: Execution) -> Result<(&CalibrationGrid, &SelectionProportionArray, f64)> {
        if self.single.is_none() {
            let t = Instant::now();
            let grid = glasso_lambda_grid(&self.s, config.n_lambdas, &config.glasso)?;
            let selector = GlassoSelector::scalar(&self.data.x, &grid.lambdas, config.glasso)?;
            let props = selection_proportions(&selector, &config.plan(self.seed), exec)?;
            let cgrid = CalibrationGrid::from_proportions(&props, build_pi_grid(config.n_pis)?)?;
            self.single = Some((cgrid, props, t.elapsed().as_secs_f64()));
        }
        let (g, p, t) = self.single.as_ref().expect("computed above");
        Ok((g, p, *t))
    }
}

/// Canonical edge indices selected by each label of `method`.
fn run_method(
    d: &mut PreparedDataset,
    config: &BenchmarkConfig,
    method: &Method,
    exec: Execution,
) -> Vec<(String, Result<Vec<usize>>, f64)> {
    let labels = method.labels();
    let t = Instant::now();
    let one = |r: Result<Vec<usize>>, secs: f64| vec![(labels[0].clone(), r, secs)];
    match method {
        Method::ScoreUnconstrained | Method::ScoreConstrained { .. } | Method::SingleBlock => {
            let (pfer_method, eta) = match method {
                Method::ScoreConstrained { pfer_method, eta } => (*pfer_method, Some(*eta)),
                Method::SingleBlock => (config.multiblock_pfer_method, config.multiblock_eta),
                _ => (PferMethod::Mb, None),
            };
            let r = d.single_block(config, exec).and_then(|(grid, props, shared)| {
                let surface = score_surface(props, grid, pfer_method, eta)?;
                Ok((calibrate(&surface, grid, props)?.selected, shared))
            });
            match r {
                Ok((sel, shared)) => one(Ok(sel), shared + t.elapsed().as_secs_f64()),
                Err(e) => one(Err(e), t.elapsed().as_secs_f64()),
            }
        }
        Method::ErrorControl { pfer_method, eta, pis } => match d.single_block(config, exec) {
            Ok((grid, props, shared)) => pis
                .iter()
                .zip(labels)
                .map(|(&pi, label)| {
                    let t = Instant::now();
                    let r = calibrate_error_control(props, grid, pi, *pfer_method, *eta).map(|c| c.selected);
                    (label, r, shared + t.elapsed().as_secs_f64())
                })
                .collect(),
            Err(e) => {
                let msg = e.to_string();
                labels.into_iter().map(|l| (l, Err(Error::InvalidInput(msg.clone())), 0.0)).collect()
            }
        },
        Method::Bic | Method::Ebic { .. } | Method::Aic => {
            let (criterion, gamma) = match method {
                Method::Bic => (Criterion::Bic, stabsel::stability::DEFAULT_EBIC_GAMMA),
                Method::Aic => (Criterion::Aic, stabsel::stability::DEFAULT_EBIC_GAMMA),
                Method::Ebic { gamma } => (Criterion::Ebic, *gamma),
                _ => unreachable!(),
            };
            let r = (|| {
                let grid = glasso_lambda_grid(&d.s, config.n_lambdas, &config.glasso)?;
                let ic = information_criteria(&d.s, &grid.lambdas, d.data.x.n(), gamma, &config.glasso)?;
                let support = ic.support(criterion).ok_or_else(|| Error::InvalidInput("no valid penalty on the path".into()))?;
                let p = support.p();
                Ok(support.edges().iter().map(|&(i, j)| edge_index(i, j, p)).collect())
            })();
            one(r, t.elapsed().as_secs_f64())
        }
        Method::Blockwise { lambda0 } => lambda0
            .iter()
            .zip(labels)
            .map(|(&l0, label)| {
                let t = Instant::now();
                let r = (|| {
                    let blocks = config.blocks()?.expect("validated");
                    let grids = (0..blocks.n_blocks())
                        .map(|b| Ok(block_lambda_grid(&d.s, &blocks, b, l0, config.lambdas_per_block, &config.glasso)?.lambdas))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(calibrate_blockwise(&d.data.x, &blocks, l0, &grids, &multiblock_settings(config, d.seed)?, exec)?.selected)
                })();
                (label, r, t.elapsed().as_secs_f64())
            })
            .collect(),
        Method::Joint => {
            let r = (|| {
                let blocks = config.blocks()?.expect("validated");
                let grids = (0..blocks.n_blocks())
                    .map(|b| {
                        Ok(block_lambda_grid(&d.s, &blocks, b, DEFAULT_LAMBDA0, config.joint_lambdas_per_block, &config.glasso)?.lambdas)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(calibrate_multiparameter(&d.data.x, &blocks, &grids, &multiblock_settings(config, d.seed)?, exec)?.selected)
            })();
            one(r, t.elapsed().as_secs_f64())
        }
    }
}

fn multiblock_settings(config: &BenchmarkConfig, seed: u64) -> Result<MultiBlockSettings> {
    Ok(MultiBlockSettings {
        pis: build_pi_grid(config.n_pis)?,
        plan: config.plan(seed),
        pfer_method: config.multiblock_pfer_method,
        eta: config.multiblock_eta,
        glasso: config.glasso,
    })
}

/// Scopes over which rows are reported: everything, then each block.
fn scopes(config: &BenchmarkConfig) -> Result<Vec<(String, Option<Vec<usize>>)>> {
    let mut out = vec![("overall".to_string(), None)];
    if let Some(blocks) = config.blocks()? {
        if blocks.n_blocks() > 1 {
            for b in 0..blocks.n_blocks() {
                out.push((blocks.block_label(b), Some(blocks.block_edges(b))));
            }
        }
    }
    Ok(out)
}

/// Confusion counts of `selected` against `truth`, both canonical edge indices,
/// restricted to `scope` when given.
pub fn score_selection(selected: &[usize], truth: &[usize], p: usize, scope: Option<&[usize]>) -> Result<(usize, usize, usize, f64, f64, f64)> {
    let (sel, tru, universe) = match scope {
        None => (selected.to_vec(), truth.to_vec(), n_pairs(p)),
        Some(edges) => {
            let pos: BTreeMap<usize, usize> = edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
            let keep = |v: &[usize]| v.iter().filter_map(|e| pos.get(e).copied()).collect::<Vec<_>>();
            (keep(selected), keep(truth), edges.len())
        }
    };
    let c = confusion(&sel, &tru, universe)?;
    let perf = precision_recall_f1(&c);
    Ok((c.tp, c.fp, c.fn_, perf.precision, perf.recall, perf.f1))
}

/// Every method on one dataset.
pub fn evaluate_dataset(d: &mut PreparedDataset, config: &BenchmarkConfig, exec: Execution) -> Result<Vec<BenchmarkRow>> {
    let scopes = scopes(config)?;
    let p = config.simulation.p;
    let mut rows = Vec::new();
    for method in &config.methods {
        for (label, result, seconds) in run_method(d, config, method, exec) {
            for (scope, edges) in &scopes {
                let base = BenchmarkRow {
                    dataset: d.index,
                    seed: d.seed,
                    method: label.clone(),
                    scope: scope.clone(),
                    status: "ok".into(),
                    tp: 0,
                    fp: 0,
                    fn_: 0,
                    precision: f64::NAN,
                    recall: f64::NAN,
                    f1: f64::NAN,
                    seconds,
                };
                let row = match &result {
                    Ok(sel) => {
                        let (tp, fp, fn_, precision, recall, f1) = score_selection(sel, &d.truth, p, edges.as_deref())?;
                        BenchmarkRow { tp, fp, fn_, precision, recall, f1, ..base }
                    }
                    Err(e) => BenchmarkRow { status: format!("failed: {e}"), ..base },
                };
                rows.push(row);
            }
            if let Err(e) = &result {
                log::warn!("dataset {} method {label}: {e}", d.index);
            }
        }
    }
    Ok(rows)
}

/// Runs the benchmark over all datasets (in parallel), rows in dataset order.
pub fn run_benchmark(config: &BenchmarkConfig, exec: Execution) -> Result<Vec<BenchmarkRow>> {
    config.validate()?;
    if config.datasets == 0 {
        log::warn!("benchmark with 0 datasets: empty table");
        return Ok(Vec::new());
    }
    let per = map_indexed(exec, config.datasets, |i| {
        let t = Instant::now();
        let rows = PreparedDataset::new(config, i).and_then(|mut d| evaluate_dataset(&mut d, config, exec));
        log::info!("dataset {}/{} done in {:.1}s", i + 1, config.datasets, t.elapsed().as_secs_f64());
        rows.unwrap_or_else(|e| failed_dataset(config, i, &e))
    });
    Ok(per.into_iter().flatten().collect())
}

fn failed_dataset(config: &BenchmarkConfig, i: usize, e: &Error) -> Vec<BenchmarkRow> {
    log::warn!("dataset {i} failed: {e}");
    let seed = dataset_seed(config.seed, i as u64);
    let scopes = scopes(config).unwrap_or_else(|_| vec![("overall".into(), None)]);
    let mut rows = Vec::new();
    for m in &config.methods {
        for label in m.labels() {
            for (scope, _) in &scopes {
                rows.push(BenchmarkRow {
                    dataset: i,
                    seed,
                    method: label.clone(),
                    scope: scope.clone(),
                    status: format!("failed: {e}"),
                    tp: 0,
                    fp: 0,
                    fn_: 0,
                    precision: f64::NAN,
                    recall: f64::NAN,
                    f1: f64::NAN,
                    seconds: 0.0,
                });
            }
        }
    }
    rows
}

/// Median and interquartile range (linear interpolation between order statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianIqr {
    pub median: f64,
    pub iqr: f64,
}

pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median_iqr(values: &[f64]) -> MedianIqr {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    MedianIqr { median: quantile(&v, 0.5), iqr: quantile(&v, 0.75) - quantile(&v, 0.25) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: String,
    pub scope: String,
    pub datasets: usize,
    pub failed: usize,
    pub tp: MedianIqr,
    pub fp: MedianIqr,
    #[serde(rename = "fn")]
    pub fn_: MedianIqr,
    pub precision: MedianIqr,
    pub recall: MedianIqr,
    pub f1: MedianIqr,
    pub seconds: MedianIqr,
    /// "median [IQR]" strings, three decimals for rates and whole numbers for counts.
    pub formatted: BTreeMap<String, String>,
}

/// Median [IQR] per (method, scope), in order of first appearance.
pub fn summarize(rows: &[BenchmarkRow]) -> Vec<SummaryEntry> {
    let mut order: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.method.clone(), r.scope.clone());
        if !order.contains(&key) {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|(method, scope)| {
            let group: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.method == method && r.scope == scope).collect();
            let ok: Vec<&&BenchmarkRow> = group.iter().filter(|r| r.is_ok()).collect();
            let stat = |f: &dyn Fn(&BenchmarkRow) -> f64| median_iqr(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (tp, fp, fn_) = (stat(&|r| r.tp as f64), stat(&|r| r.fp as f64), stat(&|r| r.fn_ as f64));
            let (precision, recall, f1) = (stat(&|r| r.precision), stat(&|r| r.recall), stat(&|r| r.f1));
            let seconds = stat(&|r| r.seconds);
            let mut formatted = BTreeMap::new();
            for (name, m, digits) in [
                ("tp", tp, 0),
                ("fp", fp, 0),
                ("fn", fn_, 0),
                ("precision", precision, 3),
                ("recall", recall, 3),
                ("f1", f1, 3),
                ("seconds", seconds, 1),
            ] {
                formatted.insert(name.to_string(), format!("{:.digits$} [{:.digits$}]", m.median, m.iqr));
            }
            SummaryEntry {
                method,
                scope,
                datasets: group.len(),
                failed: group.len() - ok.len(),
                tp,
                fp,
                fn_,
                precision,
                recall,
                f1,
                seconds,
                formatted,
            }
        })
        .collect()
}
