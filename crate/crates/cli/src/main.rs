use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stabsel::resampling::{PairCounting, Scheme};
use stabsel::simulate::Topology;
use stabsel::solvers::GlassoOptions;
use stabsel::stability::PferMethod;
use stabsel::{Error, Execution};
use stabsel_cli::benchmark::{BenchmarkConfig, SimulationConfig};
use stabsel_cli::commands::{self, Sink};
use stabsel_cli::config::{
    with_overrides, CalibrationConfig, GraphSimulationConfig, MultiBlockMode, RegressionSimulationConfig, ScoreGridConfig,
};
use stabsel_cli::method::{parse_method_list, Method};

/// Stability selection calibrated by the stability score.
#[derive(Parser, Debug)]
#[command(name = "stabsel", version)]
struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "STABSEL_THREADS", default_value_t = 0)]
    threads: usize,
    /// JSON file whose fields override the command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the primary output to standard output instead of a file.
    #[arg(long, global = true)]
    stdout: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset with known ground truth.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Calibrate stability selection on a data CSV.
    #[command(subcommand)]
    Calibrate(CalibrateCommand),
    /// Compare calibration methods over simulated datasets.
    Benchmark(BenchmarkArgs),
    /// Recompute score surfaces from stored selection proportions.
    ScoreGrid(ScoreGridArgs),
}

#[derive(Subcommand, Debug)]
enum SimulateCommand {
    /// Gaussian graphical model.
    Graph(SimGraphArgs),
    /// Sparse linear regression.
    Regression(SimRegressionArgs),
}

#[derive(Subcommand, Debug)]
enum CalibrateCommand {
    /// LASSO regression; the response is a column of the data file.
    Lasso(CalibrateArgs),
    /// Graphical LASSO with one penalty for all edges.
    Glasso(CalibrateArgs),
    /// Graphical LASSO with one penalty per block of edges.
    Multiblock(CalibrateArgs),
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File name prefix of the outputs.
    #[arg(long)]
    prefix: Option<String>,
}

#[derive(Clone, Debug)]
struct Methods(Vec<Method>);

fn parse_methods(s: &str) -> Result<Methods, String> {
    parse_method_list(s).map(Methods)
}

/// Comma-separated group sizes.
#[derive(Clone, Debug)]
struct Groups(Vec<usize>);

fn parse_groups(s: &str) -> Result<Groups, String> {
    s.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad group size `{t}`"))).collect::<Result<_, _>>().map(Groups)
}

fn parse_bound(s: &str) -> Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "none" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|_| format!("bad PFER bound `{s}`")),
    }
}

/// An infinite bound is the same as no bound.
fn finite_bound(b: Option<f64>) -> Option<f64> {
    b.filter(|v| v.is_finite())
}

#[derive(Args, Debug)]
struct SimGraphArgs {
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Erdos-Renyi edge density (ignored for scale-free graphs).
    #[arg(long, default_value_t = 0.02)]
    nu: f64,
    /// Scale-free (preferential attachment) instead of Erdos-Renyi.
    #[arg(long)]
    scale_free: bool,
    /// Variable group sizes, e.g. 50,50.
    #[arg(long, value_parser = parse_groups)]
    blocks: Option<Groups>,
    /// Scaling of between-group precision entries.
    #[arg(long, default_value_t = 1.0)]
    v_b: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SimRegressionArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    p: usize,
    #[arg(long, default_value_t = 10)]
    signals: usize,
    /// Proportion of variance of the response explained by the predictors.
    #[arg(long, default_value_t = 0.6)]
    ev: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    ComplementaryPairs,
    Subsample,
    Bootstrap,
}

#[derive(Args, Debug)]
struct Resampling {
    #[arg(long, value_enum, default_value = "complementary-pairs")]
    scheme: SchemeArg,
    /// Subsample proportion.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Number of resamples (pairs under complementary pairs).
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Count complementary half-sample fits in `k` instead of pairs.
    #[arg(long)]
    count_half_fits: bool,
}

impl Resampling {
    fn scheme(&self) -> Scheme {
        match self.scheme {
            SchemeArg::ComplementaryPairs => Scheme::ComplementaryPairs,
            SchemeArg::Subsample => Scheme::Subsample { tau: self.tau },
            SchemeArg::Bootstrap => Scheme::Bootstrap,
        }
    }

    fn pair_counting(&self) -> PairCounting {
        if self.count_half_fits {
            PairCounting::HalfFits
        } else {
            PairCounting::Pairs
        }
    }
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Number of penalty values.
    #[arg(long, default_value_t = 50)]
    lambdas: usize,
    /// Number of thresholds in [0.6, 0.9].
    #[arg(long, default_value_t = 31)]
    pis: usize,
    #[command(flatten)]
    resampling: Resampling,
    #[arg(long, default_value = "MB")]
    pfer_method: PferMethod,
    /// Upper bound on the PFER (`inf` for none).
    #[arg(long, value_parser = parse_bound)]
    pfer_max: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Response column (lasso).
    #[arg(long, default_value = "y")]
    response: String,
    /// Variable group sizes, e.g. 50,50 (multiblock).
    #[arg(long, value_parser = parse_groups)]
    blocks: Option<Groups>,
    /// Penalty on the other blocks during block-wise calibration.
    #[arg(long, default_value_t = stabsel::multiblock::DEFAULT_LAMBDA0)]
    lambda0: f64,
    #[arg(long, value_enum, default_value = "blockwise")]
    mode: MultiBlockMode,
    /// Number of penalty values per block (multiblock).
    #[arg(long, default_value_t = 30)]
    lambdas_per_block: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[arg(long, default_value_t = 100)]
    datasets: usize,
    /// Comma-separated methods, e.g. "bic,ebic,score-constrained(SS,20)".
    #[arg(long, value_parser = parse_methods)]
    methods: Option<Methods>,
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.02)]
    nu: f64,
    #[arg(long)]
    scale_free: bool,
    #[arg(long, value_parser = parse_groups)]
    blocks: Option<Groups>,
    #[arg(long, default_value_t = 1.0)]
    v_b: f64,
    #[arg(long, default_value_t = 50)]
    lambdas: usize,
    #[arg(long, default_value_t = 31)]
    pis: usize,
    #[command(flatten)]
    resampling: Resampling,
    #[arg(long, default_value_t = 30)]
    lambdas_per_block: usize,
    #[arg(long, default_value_t = 5)]
    joint_lambdas_per_block: usize,
    /// PFER bound for the single-block and multi-block methods.
    #[arg(long, default_value = "MB")]
    pfer_method: PferMethod,
    /// PFER budget for the single-block and multi-block methods (`inf` for none).
    #[arg(long, value_parser = parse_bound)]
    pfer_max: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ScoreGridArgs {
    /// Proportions JSON written by `calibrate`.
    #[arg(long)]
    proportions: PathBuf,
    #[arg(long, default_value_t = 31)]
    pis: usize,
    #[arg(long, default_value = "MB")]
    pfer_method: PferMethod,
    #[arg(long, value_parser = parse_bound)]
    pfer_max: Option<f64>,
    #[command(flatten)]
    output: Output,
}

fn topology(scale_free: bool, nu: f64) -> Topology {
    if scale_free {
        Topology::ScaleFree
    } else {
        Topology::ErdosRenyi { nu }
    }
}

fn calibration_config(a: CalibrateArgs, prefix: &str) -> CalibrationConfig {
    CalibrationConfig {
        data: a.data,
        n_lambdas: a.lambdas,
        n_pis: a.pis,
        scheme: a.resampling.scheme(),
        k: a.resampling.k,
        pair_counting: a.resampling.pair_counting(),
        pfer_method: a.pfer_method,
        pfer_max: finite_bound(a.pfer_max),
        seed: a.seed,
        out_dir: a.output.out_dir,
        prefix: a.output.prefix.unwrap_or_else(|| prefix.into()),
        glasso: GlassoOptions::default(),
        response: a.response,
        groups: a.blocks.map(|g| g.0),
        lambda0: a.lambda0,
        mode: a.mode,
        lambdas_per_block: a.lambdas_per_block,
    }
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

fn usage<T>(r: stabsel::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn runtime<T>(r: stabsel::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let exec = Execution::Parallel;
    let sink = if cli.stdout { Sink::Stdout } else { Sink::File };
    let config = cli.config.as_deref();
    match cli.command {
        Command::Simulate(SimulateCommand::Graph(a)) => {
            let cfg = GraphSimulationConfig {
                topology: topology(a.scale_free, a.nu),
                p: a.p,
                n: a.n,
                groups: a.blocks.map(|g| g.0),
                v_b: a.v_b,
                seed: a.seed,
                out_dir: a.output.out_dir,
                prefix: a.output.prefix.unwrap_or_else(|| "graph".into()),
            };
            let cfg = usage(with_overrides(cfg, config))?;
            usage(cfg.validate())?;
            runtime(commands::simulate_graph(&cfg, sink))
        }
        Command::Simulate(SimulateCommand::Regression(a)) => {
            let cfg = RegressionSimulationConfig {
                n: a.n,
                p: a.p,
                signals: a.signals,
                ev: a.ev,
                seed: a.seed,
                out_dir: a.output.out_dir,
                prefix: a.output.prefix.unwrap_or_else(|| "regression".into()),
            };
            let cfg = usage(with_overrides(cfg, config))?;
            usage(cfg.validate())?;
            runtime(commands::simulate_regression_data(&cfg, sink))
        }
        Command::Calibrate(c) => {
            let (a, kind) = match c {
                CalibrateCommand::Lasso(a) => (a, "lasso"),
                CalibrateCommand::Glasso(a) => (a, "glasso"),
                CalibrateCommand::Multiblock(a) => (a, "multiblock"),
            };
            let cfg = usage(with_overrides(calibration_config(a, kind), config))?;
            usage(cfg.validate())?;
            if kind == "multiblock" && cfg.groups.is_none() {
                return Err(Failure::Usage(Error::InvalidInput("multiblock calibration needs --blocks".into())));
            }
            let out = match kind {
                "lasso" => commands::calibrate_lasso(&cfg, sink, exec),
                "glasso" => commands::calibrate_glasso(&cfg, sink, exec),
                _ => commands::calibrate_multiblock(&cfg, sink, exec),
            };
            let out = runtime(out)?;
            log::info!("selected {} features, PFER bound {}", out.selected.len(), out.pfer_bound);
            Ok(())
        }
        Command::Benchmark(a) => {
            let defaults = BenchmarkConfig::default();
            let cfg = BenchmarkConfig {
                datasets: a.datasets,
                seed: a.seed,
                simulation: SimulationConfig { topology: topology(a.scale_free, a.nu), p: a.p, n: a.n, groups: a.blocks.map(|g| g.0), v_b: a.v_b },
                methods: a.methods.map_or(defaults.methods, |m| m.0),
                n_lambdas: a.lambdas,
                n_pis: a.pis,
                scheme: a.resampling.scheme(),
                k: a.resampling.k,
                pair_counting: a.resampling.pair_counting(),
                lambdas_per_block: a.lambdas_per_block,
                joint_lambdas_per_block: a.joint_lambdas_per_block,
                multiblock_pfer_method: a.pfer_method,
                multiblock_eta: finite_bound(a.pfer_max),
                glasso: defaults.glasso,
            };
            let cfg = usage(with_overrides(cfg, config))?;
            usage(cfg.validate())?;
            let prefix = a.output.prefix.unwrap_or_else(|| "benchmark".into());
            runtime(commands::benchmark(&cfg, &a.output.out_dir, &prefix, sink, exec))
        }
        Command::ScoreGrid(a) => {
            let cfg = ScoreGridConfig {
                proportions: a.proportions,
                n_pis: a.pis,
                pfer_method: a.pfer_method,
                pfer_max: finite_bound(a.pfer_max),
                out_dir: a.output.out_dir,
                prefix: a.output.prefix.unwrap_or_else(|| "scores".into()),
            };
            let cfg = usage(with_overrides(cfg, config))?;
            usage(cfg.validate())?;
            runtime(commands::score_grid(&cfg, sink))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).target(env_logger::Target::Stderr).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start worker threads: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
