//! Command-line front end for `depthwl`.

pub mod csv;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use depthwl::config::{self, EstimatorJson, FamilyName};
use depthwl::depth::{self, DepthKind, DepthSelection, PopulationDepth};
use depthwl::estimator::{self, EstimatorConfig};
use depthwl::gaussian::GaussianParams;
use depthwl::init::{DeepCenter, InitSpec};
use depthwl::sim::{self, EfficiencyRecord, MaximaRecord};
use serde::Serialize;

pub const THREADS_ENV: &str = "DEPTHWL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "depthwl",
    version,
    about = "Depth-based weighted likelihood for Gaussian data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the roots of the estimating equations for a data set.
    Fit(FitArgs),
    /// Empirical half-space depths.
    Depth(DepthArgs),
    /// Run a Monte Carlo contamination grid.
    Simulate(SimulateArgs),
    /// Point-mass contamination experiment.
    Breakdown(BreakdownArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Piecewise,
    Smooth,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DepthMethodArg {
    Auto,
    Exact,
    Projection,
}

impl From<DepthMethodArg> for DepthKind {
    fn from(v: DepthMethodArg) -> Self {
        match v {
            DepthMethodArg::Auto => DepthKind::Auto,
            DepthMethodArg::Exact => DepthKind::Exact,
            DepthMethodArg::Projection => DepthKind::Projection,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScatterNormArg {
    Sumw,
    N,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PopulationDepthArg {
    HalfSpace,
    Chi2P,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Subsample,
    Depth,
    File,
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Residual exponent, 0 < alpha ≤ 1.
    #[arg(long, default_value_t = config::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "piecewise")]
    pub family: FamilyArg,
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub delta2: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Decay of the smooth family.
    #[arg(long)]
    pub a: Option<f64>,
    /// Trimming offset above the median residual; `inf` disables trimming.
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long, value_enum, default_value = "sumw")]
    pub scatter_norm: ScatterNormArg,
    #[arg(long, value_enum, default_value = "auto")]
    pub depth_method: DepthMethodArg,
    /// Number of projection directions.
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long, value_enum, default_value = "half-space")]
    pub population_depth: PopulationDepthArg,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

impl EstimatorArgs {
    pub fn to_json(&self, seed: u64) -> EstimatorJson {
        EstimatorJson {
            alpha: Some(self.alpha),
            family: match self.family {
                FamilyArg::Piecewise => FamilyName::Piecewise,
                FamilyArg::Smooth => FamilyName::Smooth,
            },
            delta1: self.delta1,
            delta2: self.delta2,
            gamma: self.gamma,
            a: self.a,
            xi: self.xi,
            scatter_norm: Some(
                match self.scatter_norm {
                    ScatterNormArg::Sumw => "sumw",
                    ScatterNormArg::N => "n",
                }
                .into(),
            ),
            depth_method: Some(self.depth_method.into()),
            directions: self.directions,
            depth_seed: Some(seed),
            population_depth: Some(match self.population_depth {
                PopulationDepthArg::HalfSpace => PopulationDepth::HalfSpace,
                PopulationDepthArg::Chi2P => PopulationDepth::ChiSquareP,
            }),
            tol: Some(self.tol),
            max_iter: Some(self.max_iter),
            min_effective_points: None,
        }
    }

    pub fn to_config(&self, seed: u64) -> Result<EstimatorConfig, Failure> {
        self.to_json(seed).to_config().map_err(input)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, value_enum, default_value = "subsample")]
    pub init: InitArg,
    /// JSON file with one parameter object or an array of them, for `--init file`.
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    /// Number of subsample starting values.
    #[arg(long, default_value_t = 500)]
    pub subsamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DepthArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Points to evaluate; defaults to the input rows.
    #[arg(long)]
    pub query: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub depth_method: DepthMethodArg,
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BreakdownArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long, default_value_t = 1e6)]
    pub distance: f64,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

/// Applies `DEPTHWL_THREADS` to the global pool. `0` or unset means one
/// worker per core.
pub fn configure_threads(value: Option<&str>) -> Result<(), Failure> {
    let n = match value.map(str::trim) {
        None | Some("") => return Ok(()),
        Some(s) => s
            .parse::<usize>()
            .map_err(|_| input(format!("{THREADS_ENV} must be a non-negative integer, got {s:?}")))?,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(input)
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Depth(a) => cmd_depth(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Breakdown(a) => cmd_breakdown(&a),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_init_file(path: &Path) -> Result<Vec<GaussianParams>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(GaussianParams),
        Many(Vec<GaussianParams>),
    }
    match serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))? {
        OneOrMany::One(p) => Ok(vec![p]),
        OneOrMany::Many(v) => Ok(v),
    }
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), Failure> {
    let cfg = a.estimator.to_config(a.seed)?;
    let data = csv::read_matrix(&a.input).map_err(input)?;
    let method = cfg.depth.resolve(data.p()).map_err(input)?;
    let spec = match a.init {
        InitArg::Subsample => InitSpec::Subsample {
            b: a.subsamples,
            seed: a.seed,
        },
        InitArg::Depth => InitSpec::Depth {
            center: DeepCenter::DeepestPoint,
        },
        InitArg::File => {
            let path = a
                .init_file
                .as_deref()
                .ok_or_else(|| input("--init file requires --init-file PATH"))?;
            InitSpec::Custom {
                params: read_init_file(path)?,
            }
        }
    };
    let inits = spec.generate(&data, &method, &[]).map_err(input)?;
    let roots = estimator::find_roots(&data, &cfg, &inits).map_err(input)?;
    let json = serde_json::to_string_pretty(&roots).map_err(input)?;
    emit(a.output.as_deref(), &(json + "\n"))?;
    if roots.is_empty() {
        return Err(Failure {
            code: 2,
            message: format!("no start converged ({} starts)", roots.starts.len()),
        });
    }
    Ok(())
}

pub fn cmd_depth(a: &DepthArgs) -> Result<(), Failure> {
    if a.directions == Some(0) {
        return Err(input("--directions must be at least 1"));
    }
    let data = csv::read_matrix(&a.input).map_err(input)?;
    let selection = DepthSelection {
        kind: a.depth_method.into(),
        n_directions: a.directions,
        seed: a.seed,
    };
    let method = selection.resolve(data.p()).map_err(input)?;
    let values = match &a.query {
        None => depth::empirical_depths_all(&data, &method)
            .map_err(input)?
            .values()
            .to_vec(),
        Some(q) => {
            let queries = csv::read_matrix(q).map_err(input)?;
            depth::empirical_depths(&queries, &data, &method).map_err(input)?
        }
    };
    emit(a.output.as_deref(), &csv::depths_csv(&values))
}

#[derive(Serialize)]
struct Summary<'a> {
    maxima: &'a [MaximaRecord],
    efficiency: Vec<EfficiencyRecord>,
}

/// `x` rounded to six significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..=9).contains(&mag) {
        return format!("{x:.5e}");
    }
    format!("{:.*}", (5 - mag).max(0) as usize, x)
}

pub fn maxima_table(maxima: &[MaximaRecord]) -> String {
    let mut out = format!(
        "{:>3} {:>4} {:>8} {:>12} {:>12} {:>12} {:>12}\n",
        "p", "s", "epsilon", "max_mse", "max_kl", "mle_max_mse", "mle_max_kl"
    );
    for m in maxima {
        let _ = writeln!(
            out,
            "{:>3} {:>4} {:>8} {:>12} {:>12} {:>12} {:>12}",
            m.p,
            m.s,
            sig6(m.epsilon),
            sig6(m.max_mse),
            sig6(m.max_kl),
            sig6(m.mle_max_mse),
            sig6(m.mle_max_kl)
        );
    }
    out
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.grid).map_err(|e| input(format!("{}: {e}", a.grid.display())))?;
    let cfg = config::parse_grid(&text).map_err(|e| input(format!("invalid grid config: {e}")))?;
    let report = sim::run_grid(&cfg).map_err(input)?;
    std::fs::create_dir_all(&a.output_dir).map_err(|e| input(format!("{}: {e}", a.output_dir.display())))?;
    let csv_path = a.output_dir.join("report.csv");
    std::fs::write(&csv_path, report.to_csv()).map_err(|e| input(format!("{}: {e}", csv_path.display())))?;
    let summary = Summary {
        maxima: &report.maxima,
        efficiency: sim::efficiency_from_report(&report),
    };
    let json_path = a.output_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(input)? + "\n";
    std::fs::write(&json_path, json).map_err(|e| input(format!("{}: {e}", json_path.display())))?;
    print!("{}", maxima_table(&report.maxima));
    Ok(())
}

pub fn cmd_breakdown(a: &BreakdownArgs) -> Result<(), Failure> {
    if a.n <= 2 * a.p {
        return Err(input(format!(
            "breakdown needs more than twice as many clean points as dimensions (n > 2p); got n = {}, p = {}",
            a.n, a.p
        )));
    }
    let cfg = a.estimator.to_config(a.seed)?;
    let report = sim::breakdown_experiment(a.n, a.p, a.m, a.distance, &cfg, a.seed).map_err(input)?;
    let json = serde_json::to_string_pretty(&report).map_err(input)?;
    emit(a.output.as_deref(), &(json + "\n"))
}
