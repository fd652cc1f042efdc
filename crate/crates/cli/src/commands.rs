//! The command implementations behind the `stabsel` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stabsel::graph::edge_pair;
use stabsel::io::{
    read_table_csv, split_response, surface_tsv_header, write_design_csv, write_edges_csv, write_matrix_csv, write_named_values_csv,
    write_surface_rows,
};
use stabsel::multiblock::{block_lambda_grid, calibrate_blockwise, calibrate_multiparameter, BlockStructure, MultiBlockResult, MultiBlockSettings};
use stabsel::resampling::{selection_proportions, GlassoSelector, LassoSelector, SelectionProportionArray};
use stabsel::simulate::{simulate_graph_dataset, simulate_regression, GraphSpec};
use stabsel::solvers::{empirical_covariance, LassoOptions};
use stabsel::stability::{
    build_pi_grid, calibrate, glasso_lambda_grid, lasso_lambda_grid, score_surface, CalibrationGrid, CalibrationResult, PferMethod,
    StabilityScoreSurface,
};
use stabsel::{DesignMatrix, Error, Execution, Result};

use crate::benchmark::{run_benchmark, summarize, write_rows_tsv, BenchmarkConfig};
use crate::config::{CalibrationConfig, GraphSimulationConfig, MultiBlockMode, RegressionSimulationConfig, ScoreGridConfig};

/// Where the primary output of a command goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sink {
    File,
    Stdout,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_context(e, dir))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_context(e, path))?))
}

fn io_context(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes the primary output either to `path` or to standard output.
fn emit(sink: Sink, path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match sink {
        Sink::File => {
            let mut w = create(path)?;
            f(&mut w)?;
            w.flush()?;
            log::info!("wrote {}", path.display());
        }
        Sink::Stdout => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    emit(Sink::File, path, f)
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn out_path(dir: &Path, prefix: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{prefix}{suffix}"))
}

#[derive(Serialize)]
struct GraphSidecar<'a> {
    kind: &'static str,
    config: &'a GraphSimulationConfig,
    n_edges: usize,
    u: f64,
    contrast: usize,
    block_labels: Option<Vec<String>>,
}

/// Data CSV (n × p), true edge list and a JSON sidecar.
pub fn simulate_graph(cfg: &GraphSimulationConfig, sink: Sink) -> Result<()> {
    let blocks = cfg.groups.as_deref().map(BlockStructure::new).transpose()?;
    let spec = GraphSpec { topology: cfg.topology, p: cfg.p, seed: cfg.seed };
    let d = simulate_graph_dataset(&spec, cfg.n, blocks.as_ref(), cfg.v_b)?;
    emit(sink, &out_path(&cfg.out_dir, &cfg.prefix, "_data.csv"), |w| write_design_csv(w, &d.x))?;
    write_file(&out_path(&cfg.out_dir, &cfg.prefix, "_truth.csv"), |w| write_edges_csv(w, d.x.names(), &d.theta.edges(), None))?;
    let sidecar = GraphSidecar {
        kind: "graph",
        config: cfg,
        n_edges: d.theta.n_edges(),
        u: d.u,
        contrast: d.contrast,
        block_labels: blocks.as_ref().map(|b| (0..b.n_blocks()).map(|i| b.block_label(i)).collect()),
    };
    write_file(&out_path(&cfg.out_dir, &cfg.prefix, ".json"), |w| write_json(w, &sidecar))
}

#[derive(Serialize)]
struct RegressionSidecar<'a> {
    kind: &'static str,
    config: &'a RegressionSimulationConfig,
    response: &'static str,
    signals: Vec<String>,
    sigma_noise: f64,
}

/// Data CSV with the response `y` first, true coefficients and a JSON sidecar.
pub fn simulate_regression_data(cfg: &RegressionSimulationConfig, sink: Sink) -> Result<()> {
    let d = simulate_regression(cfg.n, cfg.p, cfg.signals, cfg.ev, cfg.seed)?;
    let mut names = vec!["y".to_string()];
    names.extend(d.x.names().iter().cloned());
    if d.x.names().iter().any(|n| n == "y") {
        return Err(Error::InvalidInput("a predictor is named `y`".into()));
    }
    let mut table = d.x.values().clone().insert_column(0, 0.0);
    table.set_column(0, &nalgebra::DVector::from_column_slice(&d.y));
    emit(sink, &out_path(&cfg.out_dir, &cfg.prefix, "_data.csv"), |w| write_matrix_csv(w, &names, &table))?;
    write_file(&out_path(&cfg.out_dir, &cfg.prefix, "_truth.csv"), |w| {
        write_named_values_csv(w, ["feature", "beta"], d.x.names(), &d.beta_true)
    })?;
    let sidecar = RegressionSidecar {
        kind: "regression",
        config: cfg,
        response: "y",
        signals: d.signal_set.iter().map(|&j| d.x.names()[j].clone()).collect(),
        sigma_noise: d.sigma_noise,
    };
    write_file(&out_path(&cfg.out_dir, &cfg.prefix, ".json"), |w| write_json(w, &sidecar))
}

/// One calibrated set of features, as stored in result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// `all` for single-block calibration, otherwise the block label.
    pub label: String,
    pub lambda_hat: f64,
    pub pi_hat: f64,
    pub lambda_index: usize,
    pub pi_index: usize,
    pub score: f64,
    pub pfer_bound: f64,
    pub q: f64,
    pub eta: Option<f64>,
    /// Feature names, or `[node1, node2]` pairs for edges, in storage order.
    pub features: Vec<Vec<String>>,
    /// Selection proportion of every feature at `lambda_hat`.
    pub proportions: Vec<f64>,
    /// Positions in `features` with proportion at least `pi_hat`.
    pub selected: Vec<usize>,
}

impl CalibrationReport {
    fn new(label: &str, r: &CalibrationResult, eta: Option<f64>, features: Vec<Vec<String>>) -> Self {
        Self {
            label: label.to_string(),
            lambda_hat: r.lambda_hat,
            pi_hat: r.pi_hat,
            lambda_index: r.lambda_index,
            pi_index: r.pi_index,
            score: r.score,
            pfer_bound: r.pfer_bound,
            q: r.q,
            eta,
            features,
            proportions: r.proportions.clone(),
            selected: r.selected.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutput {
    pub mode: String,
    pub n: usize,
    pub p: usize,
    pub k_effective: usize,
    pub pfer_method: PferMethod,
    /// Overall PFER budget (`null` when unconstrained).
    pub pfer_max: Option<f64>,
    pub lambda0: Option<f64>,
    /// Sum of the per-block bounds.
    pub pfer_bound: f64,
    pub blocks: Vec<CalibrationReport>,
    /// Union of the selected features (names, or name pairs for edges).
    pub selected: Vec<Vec<String>>,
}

/// Proportions stored next to a result so that surfaces can be recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredProportions {
    pub label: String,
    /// Whether the average selection count is made non-decreasing along the grid
    /// before scoring (false for slices of a joint grid).
    pub running_max_q: bool,
    pub proportions: SelectionProportionArray,
}

fn edge_names(x: &DesignMatrix, edges: impl IntoIterator<Item = usize>) -> Vec<Vec<String>> {
    let p = x.p();
    edges
        .into_iter()
        .map(|e| {
            let (i, j) = edge_pair(e, p);
            vec![x.names()[i].clone(), x.names()[j].clone()]
        })
        .collect()
}

fn read_data(cfg: &CalibrationConfig) -> Result<(Vec<String>, nalgebra::DMatrix<f64>)> {
    let file = File::open(&cfg.data).map_err(|e| io_context(e, &cfg.data))?;
    let (names, m) = read_table_csv(std::io::BufReader::new(file))?;
    cfg.plan().validate(m.nrows())?;
    Ok((names, m))
}

fn write_outputs(
    cfg: &CalibrationConfig,
    sink: Sink,
    output: &CalibrationOutput,
    surfaces: &[(String, &StabilityScoreSurface)],
    stored: &[StoredProportions],
) -> Result<()> {
    let with_block = surfaces.len() > 1;
    write_file(&out_path(&cfg.out_dir, &cfg.prefix, "_surface.tsv"), |w| {
        w.write_all(surface_tsv_header(with_block).as_bytes())?;
        for (label, s) in surfaces {
            write_surface_rows(&mut *w, s, with_block.then_some(label.as_str()))?;
        }
        Ok(())
    })?;
    write_file(&out_path(&cfg.out_dir, &cfg.prefix, "_proportions.json"), |w| write_json(w, &stored))?;
    emit(sink, &out_path(&cfg.out_dir, &cfg.prefix, ".json"), |w| write_json(w, output))
}

fn single_block(
    cfg: &CalibrationConfig,
    sink: Sink,
    mode: &str,
    x: &DesignMatrix,
    props: SelectionProportionArray,
    features: Vec<Vec<String>>,
) -> Result<CalibrationOutput> {
    let grid = CalibrationGrid::from_proportions(&props, build_pi_grid(cfg.n_pis)?)?;
    let surface = score_surface(&props, &grid, cfg.pfer_method, cfg.pfer_max)?;
    let result = calibrate(&surface, &grid, &props)?;
    let report = CalibrationReport::new("all", &result, cfg.pfer_max, features);
    let output = CalibrationOutput {
        mode: mode.into(),
        n: x.n(),
        p: x.p(),
        k_effective: props.k_effective,
        pfer_method: cfg.pfer_method,
        pfer_max: cfg.pfer_max,
        lambda0: None,
        pfer_bound: result.pfer_bound,
        selected: report.selected.iter().map(|&j| report.features[j].clone()).collect(),
        blocks: vec![report],
    };
    let stored = [StoredProportions { label: "all".into(), running_max_q: true, proportions: props }];
    write_outputs(cfg, sink, &output, &[("all".into(), &surface)], &stored)?;
    Ok(output)
}

pub fn calibrate_lasso(cfg: &CalibrationConfig, sink: Sink, exec: Execution) -> Result<CalibrationOutput> {
    let (names, m) = read_data(cfg)?;
    let (x, y) = split_response(names, m, &cfg.response)?;
    let opts = LassoOptions::default();
    let grid = lasso_lambda_grid(&x, &y, cfg.n_lambdas, &opts)?;
    let selector = LassoSelector::new(&x, &y, &grid.lambdas, opts)?;
    let props = selection_proportions(&selector, &cfg.plan(), exec)?;
    let features = x.names().iter().map(|n| vec![n.clone()]).collect();
    single_block(cfg, sink, "lasso", &x, props, features)
}

pub fn calibrate_glasso(cfg: &CalibrationConfig, sink: Sink, exec: Execution) -> Result<CalibrationOutput> {
    let (names, m) = read_data(cfg)?;
    let x = DesignMatrix::new(m, names)?;
    let s = empirical_covariance(&x)?;
    let grid = glasso_lambda_grid(&s, cfg.n_lambdas, &cfg.glasso)?;
    let selector = GlassoSelector::scalar(&x, &grid.lambdas, cfg.glasso)?;
    let props = selection_proportions(&selector, &cfg.plan(), exec)?;
    let features = edge_names(&x, 0..props.n_features);
    single_block(cfg, sink, "glasso", &x, props, features)
}

pub fn calibrate_multiblock(cfg: &CalibrationConfig, sink: Sink, exec: Execution) -> Result<CalibrationOutput> {
    let Some(groups) = &cfg.groups else {
        return Err(Error::InvalidInput("multi-block calibration needs --blocks".into()));
    };
    let (names, m) = read_data(cfg)?;
    let x = DesignMatrix::new(m, names)?;
    let blocks = BlockStructure::new(groups)?;
    if blocks.p() != x.p() {
        return Err(Error::Dimension(format!("group sizes sum to {}, data has {} columns", blocks.p(), x.p())));
    }
    let s = empirical_covariance(&x)?;
    let grids = (0..blocks.n_blocks())
        .map(|b| Ok(block_lambda_grid(&s, &blocks, b, cfg.lambda0, cfg.lambdas_per_block, &cfg.glasso)?.lambdas))
        .collect::<Result<Vec<_>>>()?;
    let settings = MultiBlockSettings {
        pis: build_pi_grid(cfg.n_pis)?,
        plan: cfg.plan(),
        pfer_method: cfg.pfer_method,
        eta: cfg.pfer_max,
        glasso: cfg.glasso,
    };
    let (mode, result): (&str, MultiBlockResult) = match cfg.mode {
        MultiBlockMode::Blockwise => ("multiblock-blockwise", calibrate_blockwise(&x, &blocks, cfg.lambda0, &grids, &settings, exec)?),
        MultiBlockMode::Joint => ("multiblock-joint", calibrate_multiparameter(&x, &blocks, &grids, &settings, exec)?),
    };
    let reports: Vec<CalibrationReport> = result
        .blocks
        .iter()
        .map(|b| CalibrationReport::new(&b.label, &b.result, b.eta, edge_names(&x, b.edges.iter().copied())))
        .collect();
    let output = CalibrationOutput {
        mode: mode.into(),
        n: x.n(),
        p: x.p(),
        k_effective: cfg.plan().k_effective(),
        pfer_method: cfg.pfer_method,
        pfer_max: cfg.pfer_max,
        lambda0: result.lambda0,
        pfer_bound: result.pfer,
        blocks: reports,
        selected: edge_names(&x, result.selected.iter().copied()),
    };
    let surfaces: Vec<(String, &StabilityScoreSurface)> = result.blocks.iter().map(|b| (b.label.clone(), &b.surface)).collect();
    let stored: Vec<StoredProportions> = result
        .blocks
        .iter()
        .map(|b| StoredProportions {
            label: b.label.clone(),
            running_max_q: cfg.mode == MultiBlockMode::Blockwise,
            proportions: b.proportions.clone(),
        })
        .collect();
    write_outputs(cfg, sink, &output, &surfaces, &stored)?;
    Ok(output)
}

/// Recomputes score surfaces from stored proportions, e.g. with another PFER bound.
pub fn score_grid(cfg: &ScoreGridConfig, sink: Sink) -> Result<()> {
    let file = File::open(&cfg.proportions).map_err(|e| io_context(e, &cfg.proportions))?;
    let stored: Vec<StoredProportions> = serde_json::from_reader(std::io::BufReader::new(file))?;
    if stored.is_empty() {
        return Err(Error::InvalidInput("no stored proportions".into()));
    }
    let pis = build_pi_grid(cfg.n_pis)?;
    let total: usize = stored.iter().map(|s| s.proportions.n_features).sum();
    let mut surfaces = Vec::new();
    for s in &stored {
        let props = &s.proportions;
        let grid = if s.running_max_q {
            CalibrationGrid::from_proportions(props, pis.clone())?
        } else {
            CalibrationGrid::new(props.lambdas.clone(), pis.clone(), props.q.clone())
                .map(|g| CalibrationGrid { q: g.q_raw.clone(), ..g })?
        };
        let eta = cfg.pfer_max.map(|e| e * props.n_features as f64 / total as f64);
        surfaces.push((s.label.clone(), score_surface(props, &grid, cfg.pfer_method, eta)?));
    }
    let with_block = surfaces.len() > 1;
    emit(sink, &out_path(&cfg.out_dir, &cfg.prefix, "_surface.tsv"), |w| {
        w.write_all(surface_tsv_header(with_block).as_bytes())?;
        for (label, s) in &surfaces {
            write_surface_rows(&mut *w, s, with_block.then_some(label.as_str()))?;
        }
        Ok(())
    })
}

/// Results table (TSV) and summary JSON.
pub fn benchmark(cfg: &BenchmarkConfig, out_dir: &Path, prefix: &str, sink: Sink, exec: Execution) -> Result<()> {
    let rows = run_benchmark(cfg, exec)?;
    emit(sink, &out_path(out_dir, prefix, ".tsv"), |w| Ok(write_rows_tsv(w, &rows)?))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a BenchmarkConfig,
        rows: usize,
        methods: Vec<crate::benchmark::SummaryEntry>,
    }
    let summary = Summary { config: cfg, rows: rows.len(), methods: summarize(&rows) };
    write_file(&out_path(out_dir, prefix, "_summary.json"), |w| write_json(w, &summary))
}
