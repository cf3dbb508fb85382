//! `qaoa-ms`: graph generation, landscapes, single optimizations and the
//! benchmark experiments, all with file-based outputs.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use qaoa_multistart::bench::MethodSpec;

#[derive(Debug, Parser)]
#[command(name = "qaoa-ms", version, about = "QAOA modularity clustering with multistart parameter optimization")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated graph as an edge list.
    Gen(GenArgs),
    /// Evaluate the p = 1 objective on a (beta, gamma) grid.
    Landscape(LandscapeArgs),
    /// One optimization run with a trace and a JSON summary.
    Optimize(OptimizeArgs),
    /// Fixed-budget benchmark over a graph set.
    Bench(ExperimentArgs),
    /// Warm versus cold starts on graphs with one edge removed.
    Reuse(ExperimentArgs),
    /// Exact best two-community split by enumeration.
    Bruteforce(GraphArg),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("family").required(true).args(["caveman", "partition", "suite"])))]
pub struct GenArgs {
    /// Connected caveman graph: number of cliques and clique size.
    #[arg(long, num_args = 2, value_names = ["CLIQUES", "SIZE"])]
    pub caveman: Option<Vec<usize>>,
    /// Random partition graph with these block sizes, e.g. `5,5`.
    #[arg(long, value_delimiter = ',', value_name = "SIZES")]
    pub partition: Option<Vec<usize>>,
    /// Every benchmark-suite graph, one file per graph in the `--out` directory.
    #[arg(long, requires = "out")]
    pub suite: bool,
    #[arg(long, default_value_t = qaoa_multistart::bench::PARTITION_P_IN)]
    pub p_in: f64,
    #[arg(long, default_value_t = qaoa_multistart::bench::PARTITION_P_OUT)]
    pub p_out: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (directory with `--suite`); standard output otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphArg {
    /// Edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Grid points along beta and gamma.
    #[arg(long, num_args = 2, value_names = ["B", "G"], default_values_t = [100, 100],
          value_parser = clap::value_parser!(u32).range(1..))]
    pub res: Vec<u32>,
    /// Output CSV; standard output otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub p: u32,
    /// nelder-mead, pattern, model-tr, or restarting:<m> / multistart:<m>.
    #[arg(long, default_value = "multistart:model-tr", value_parser = parse_method)]
    pub method: MethodSpec,
    #[arg(long, default_value_t = qaoa_multistart::bench::DEFAULT_BUDGET,
          value_parser = positive)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimate the objective from this many measurement shots.
    #[arg(long, value_parser = positive)]
    pub shots: Option<usize>,
    /// Starting points, one `beta.. gamma..` point per line.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Directory receiving `trace.csv` and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML config, or a manifest JSON from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long, value_parser = positive)]
    pub workers: Option<usize>,
}

fn parse_method(s: &str) -> Result<MethodSpec, String> {
    s.parse().map_err(|e: qaoa_multistart::Error| e.to_string())
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config values: exit 2.
    Usage(String),
    /// Anything that went wrong while doing the work: exit 1.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let outcome = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Landscape(a) => commands::landscape(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Reuse(a) => commands::reuse(&a),
        Command::Bruteforce(a) => commands::bruteforce(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
