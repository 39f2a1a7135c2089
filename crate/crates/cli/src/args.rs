use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use h2sgnn_core::oracle::CountVariant;
use h2sgnn_core::synthetic::FixtureKind;
use h2sgnn_core::Variant;

#[derive(Debug, Parser)]
#[command(name = "h2sgnn", version, about = "Spectral filtering on heterogeneous graphs")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Write the command's result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Random seed. Overrides the seed list for `train`, is the base seed for
    /// `oracle-check` and the generator seed for `make-fixture`. Commands
    /// without randomness accept and ignore it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Edge homophily of meta-path subgraphs, as a CSV of percentages.
    Homophily(HomophilyArgs),
    /// Train one model per seed and aggregate the test scores.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Frequency responses of the learned filters, as CSV.
    FilterResponse(FilterResponseArgs),
    /// Parameter and term counts of the filter families.
    CountParams(CountParamsArgs),
    /// Check that powers of the weighted adjacency sum equal their word expansion.
    OracleCheck(OracleCheckArgs),
    /// Write a generated dataset directory (`--out` names the directory).
    MakeFixture(MakeFixtureArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArg {
    /// Dataset directory. Relative paths that do not exist resolve against
    /// $H2SGNN_DATA_DIR.
    #[arg(long, value_name = "DIR")]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct HomophilyArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,

    /// Meta-paths, e.g. `PAP,PSP`. A value containing `=` is one explicit
    /// path `NAME=rel1,rel2`; repeat the flag for several.
    #[arg(long, short = 'm', required = true)]
    pub metapaths: Vec<String>,

    /// Weight each edge by its path-instance count.
    #[arg(long)]
    pub weighted: bool,

    /// Replace path-instance counts by 1 before measuring.
    #[arg(long)]
    pub binarize: bool,

    /// Count self-loops as edges.
    #[arg(long)]
    pub keep_selfloops: bool,

    /// Only count edges whose endpoints are both labeled.
    #[arg(long)]
    pub labeled_only: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,

    /// Overrides the config's dataset.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,

    /// Overrides the config's model variant.
    #[arg(long)]
    pub variant: Option<Variant>,

    /// Overrides the config's epoch budget.
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Directory for per-seed reports and checkpoints. Defaults to the
    /// config's `output_dir`, then `runs`.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    #[command(flatten)]
    pub dataset: DatasetArg,

    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitName,
}

#[derive(Debug, Args)]
pub struct FilterResponseArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// Evenly spaced eigenvalues in [0, 2], endpoints included.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,

    /// Debug: replace every coefficient vector by (1, 0, ..., 0).
    #[arg(long)]
    pub unit_coeffs: bool,
}

#[derive(Debug, Args)]
pub struct CountParamsArgs {
    /// One family; all four when omitted.
    #[arg(long)]
    pub variant: Option<CountVariant>,

    /// Number of meta-paths.
    #[arg(short = 'r', long = "relations")]
    pub r: usize,

    /// Polynomial order.
    #[arg(short = 'k', long = "order")]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    #[arg(short = 'r', long = "relations")]
    pub r: usize,

    #[arg(short = 'k', long = "order")]
    pub k: usize,

    /// Number of random instances; seeds run from `--seed` (default 0).
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,

    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Side of the random adjacencies.
    #[arg(long, default_value_t = 8)]
    pub nodes: usize,

    /// Random panels per instance.
    #[arg(long, default_value_t = 2)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct MakeFixtureArgs {
    #[arg(long, default_value = "mixed")]
    pub kind: FixtureKind,

    #[arg(long, default_value_t = 200)]
    pub nodes: usize,

    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,

    #[arg(long, default_value_t = 0.8)]
    pub signal: f64,
}
