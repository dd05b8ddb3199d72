//! `localdepth` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

/// Failure classes, mapped to exit codes 1, 2 and 3.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Validation(String),
    /// Standard output was closed by the reader.
    Closed,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Closed => 0,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Validation(m) => m,
            Failure::Closed => "",
        }
    }
}

impl From<localdepth::Error> for Failure {
    fn from(e: localdepth::Error) -> Self {
        use localdepth::Error as E;
        if let E::Io(io) = e {
            return io.into();
        }
        let msg = e.to_string();
        match e {
            E::Csv { .. }
            | E::Io(_)
            | E::Json(_)
            | E::TooFewPoints { .. }
            | E::Dimension { .. }
            | E::NonFinite(_)
            | E::SizeMismatch(..)
            | E::Quadrature { .. }
            | E::Envelope { .. } => Failure::Data(msg),
            _ => Failure::Usage(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return Failure::Closed;
        }
        Failure::Data(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "localdepth", version, about = "Local depth, tau-approximation and local-depth clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Local depth and tau-approximation at query points.
    Depth(DepthArgs),
    /// Mode-ascent clustering of a data file.
    Cluster(ClusterArgs),
    /// Replication study on a benchmark density.
    Bench(BenchArgs),
    /// Grid evaluation of the tau-approximation for plotting.
    Plotdata(PlotArgs),
    /// Statistical self-checks, one JSON line per verdict.
    Validate(ValidateArgs),
    /// Geometric constants of a depth family.
    Constants(ConstantsArgs),
    /// Draw a sample from a benchmark density.
    Sample(SampleArgs),
    /// Run a named recipe and compare it with its acceptance thresholds.
    Recipe(RecipeArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Default, Serialize, Deserialize)]
pub struct Common {
    /// JSON file with default values for the flags; explicit flags win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct DepthArgs {
    /// Sample CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Query CSV; defaults to the sample itself.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// lens, spherical, beta:<b>, simplicial, halfspace or halfregion.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Tuple budget of the simplicial family; 0 means exact enumeration.
    #[arg(long)]
    pub simplex_budget: Option<u64>,
    /// Constants JSON written by `localdepth constants`.
    #[arg(long)]
    pub constants: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Extra points assigned to the clusters of the data.
    #[arg(long)]
    pub extra: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<String>,
    /// Order of the distance quantile fixing tau [default: 0.05].
    #[arg(long)]
    pub q: Option<f64>,
    /// Fallback neighbour count [default: 30].
    #[arg(long)]
    pub s: Option<usize>,
    /// Neighbourhood radius [default: 0.05].
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub simplex_budget: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Assignment CSV; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Summary JSON; standard error when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Penalties of the probability distance [default: 0,1].
    #[arg(long, value_delimiter = ',')]
    pub etas: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Full result as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct PlotArgs {
    /// Benchmark density to sample (excludes --data).
    #[arg(long)]
    pub density: Option<String>,
    /// Sample CSV (excludes --density).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sample size when drawing from --density [default: 1000].
    #[arg(long)]
    pub n: Option<usize>,
    /// [default: 0.5,1,2,4]
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Lower grid corner; defaults to the sample minimum.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lo: Option<Vec<f64>>,
    /// Upper grid corner; defaults to the sample maximum.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub hi: Option<Vec<f64>>,
    /// Grid points per axis [default: 101].
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// One reference check, or every check when absent.
    #[arg(long)]
    pub check: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON-lines output; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Record wall-clock runtimes (outputs are then not byte-reproducible).
    #[arg(long)]
    pub timings: bool,
    /// List the reference checks.
    #[arg(long)]
    pub list: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lambda1_samples: Option<u64>,
    #[arg(long)]
    pub star_outer: Option<u64>,
    #[arg(long)]
    pub star_inner: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cache file read before and updated after estimation.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct RecipeArgs {
    /// Recipe id.
    pub id: Option<String>,
    /// Recipe JSON file instead of a registered id.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub list: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Depth(a) => {
            let cfg = a.common.config.clone();
            commands::depth(config::merge(a, cfg.as_deref())?)
        }
        Command::Cluster(a) => {
            let cfg = a.common.config.clone();
            commands::cluster(config::merge(a, cfg.as_deref())?)
        }
        Command::Bench(a) => {
            let cfg = a.common.config.clone();
            commands::bench(config::merge(a, cfg.as_deref())?)
        }
        Command::Plotdata(a) => {
            let cfg = a.common.config.clone();
            commands::plotdata(config::merge(a, cfg.as_deref())?)
        }
        Command::Validate(a) => {
            let cfg = a.common.config.clone();
            commands::validate(config::merge(a, cfg.as_deref())?)
        }
        Command::Constants(a) => {
            let cfg = a.common.config.clone();
            commands::constants(config::merge(a, cfg.as_deref())?)
        }
        Command::Sample(a) => {
            let cfg = a.common.config.clone();
            commands::sample(config::merge(a, cfg.as_deref())?)
        }
        Command::Recipe(a) => {
            let cfg = a.common.config.clone();
            commands::recipe(config::merge(a, cfg.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) | Err(Failure::Closed) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
