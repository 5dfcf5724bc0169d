use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod bench;
mod check;
mod commands;
mod data;

#[derive(Parser)]
#[command(name = "mmjoin", version, about = "Join-project queries with heavy/light partitioning and matrix multiplication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic edge list
    Gen(GenArgs),
    /// Evaluate π_{x,z} R(x,y) ⋈ S(z,y)
    Twopath(TwopathArgs),
    /// Evaluate a star join-project over 2 to 4 relations sharing y
    Star(StarArgs),
    /// Overlap set-similarity self-join
    Ssj(SsjArgs),
    /// Set-containment self-join
    Scj(ScjArgs),
    /// Batched boolean set intersection over a query workload
    Bsi(BsiArgs),
    /// Measure matrix multiplication times for the optimizer
    Calibrate(CalibrateArgs),
    /// Time methods on a dataset and write CSV records
    Bench(bench::BenchArgs),
    /// Summarise a bench CSV as speedups over the full-join baseline
    Report(bench::ReportArgs),
    /// Compare a method against the brute-force oracle on random data
    Check(check::CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Community,
    Uniform,
    Skewed,
}

/// Accepts plain integers and float notation such as `1e5`.
pub fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64 => Ok(x as usize),
        _ => Err(format!("not a non-negative integer: {s:?}")),
    }
}

#[derive(Args, Clone)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "community")]
    kind: DatasetKind,
    /// Target number of edges
    #[arg(long, value_parser = parse_count, default_value = "10000")]
    n: usize,
    /// Communities (community graphs only)
    #[arg(long, default_value_t = 1)]
    communities: usize,
    /// Intra-community edge probability
    #[arg(long, default_value_t = 0.8)]
    p: f64,
    /// Zipf exponent (skewed graphs only)
    #[arg(long, default_value_t = 1.1)]
    exponent: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
pub struct PlanArgs {
    /// Pick thresholds with the cost-based optimizer (the default)
    #[arg(long, conflicts_with_all = ["full_join", "closed_form", "delta1"])]
    auto_plan: bool,
    /// Light threshold for y values
    #[arg(long, requires = "delta2")]
    delta1: Option<usize>,
    /// Light threshold for x and z values
    #[arg(long, requires = "delta1")]
    delta2: Option<usize>,
    /// Skip partitioning and deduplicate the full join
    #[arg(long, conflicts_with_all = ["closed_form", "delta1"])]
    full_join: bool,
    /// Use the closed-form thresholds instead of the optimizer
    #[arg(long, conflicts_with = "delta1")]
    closed_form: bool,
    /// Calibration table; defaults to $MMJOIN_CALIBRATION
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Threads for the matrix multiplication
    #[arg(long, default_value_t = 1)]
    cores: usize,
    #[arg(long, value_enum)]
    dedup: Option<DedupArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DedupArg {
    Vector,
    Sort,
}

#[derive(Args)]
pub struct TwopathArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    /// Append the witness count to every output pair
    #[arg(long)]
    counts: bool,
    #[command(flatten)]
    plan: PlanArgs,
}

#[derive(Args)]
pub struct StarArgs {
    /// Relation files `x y`, given 2 to 4 times
    #[arg(long = "rel", required = true, num_args = 1)]
    rels: Vec<PathBuf>,
    #[arg(long, requires = "delta2")]
    delta1: Option<usize>,
    #[arg(long, requires = "delta1")]
    delta2: Option<usize>,
    #[arg(long)]
    counts: bool,
    /// Maximum heavy-combination rows per matrix
    #[arg(long, default_value_t = 1 << 16)]
    row_cap: usize,
    #[arg(long, default_value_t = 1)]
    cores: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SsjMethodArg {
    Mmjoin,
    Sizeaware,
    #[value(name = "sizeaware++", alias = "sizeaware-pp")]
    SizeawarePp,
}

#[derive(Args)]
pub struct SsjArgs {
    /// Edge list of `set element` pairs
    #[arg(long)]
    input: PathBuf,
    /// Minimum overlap
    #[arg(long, default_value_t = 2)]
    c: u32,
    #[arg(long, value_enum, default_value = "mmjoin")]
    method: SsjMethodArg,
    /// Sort by overlap, largest first
    #[arg(long)]
    ordered: bool,
    /// Depth up to which prefix-tree nodes are shared (0 disables)
    #[arg(long, default_value_t = mmjoin_core::apps::DEFAULT_PREFIX_CAP)]
    prefix_cap: usize,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    cores: usize,
}

#[derive(Args)]
pub struct ScjArgs {
    /// Edge list of `set element` pairs
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    cores: usize,
}

#[derive(Args)]
pub struct BsiArgs {
    /// Sets `a element`
    #[arg(long)]
    left: PathBuf,
    /// Sets `b element`
    #[arg(long)]
    right: PathBuf,
    /// Lines `a b arrival_micros`
    #[arg(long)]
    workload: PathBuf,
    /// Queries per batch; derived from the arrival rate when omitted
    #[arg(long)]
    batch: Option<usize>,
    /// Processing units for the delay simulation
    #[arg(long, default_value_t = 1)]
    machines: usize,
    /// Also print simulated mean delay for a range of batch sizes
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    cores: usize,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value = "calibration.tsv")]
    out: PathBuf,
    /// Largest probe dimension
    #[arg(long, default_value_t = 640)]
    max_dim: usize,
    /// Probe dimension step
    #[arg(long, default_value_t = 32)]
    step: usize,
    /// Core counts to probe, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    cores: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Twopath(a) => commands::twopath(&a),
        Command::Star(a) => commands::star(&a),
        Command::Ssj(a) => commands::ssj_cmd(&a),
        Command::Scj(a) => commands::scj(&a),
        Command::Bsi(a) => commands::bsi(&a),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Report(a) => bench::report(&a),
        Command::Check(a) => check::run(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
