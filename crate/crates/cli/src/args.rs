use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::sweep::Sweep;

/// Select the best of many items from noisy n-way comparisons.
#[derive(Debug, Parser)]
#[command(name = "bestof", version)]
pub struct Cli {
    /// Cap on worker threads for simulations.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Bradley-Terry, saturated or position models.
    Fit(FitArgs),
    /// Run the likelihood-ratio test battery.
    Test(TestArgs),
    /// Error rate versus cost of a selection algorithm on a known model.
    Simulate(SimulateArgs),
    /// Posterior-expected error and cost given comparison data.
    Posterior(PosteriorArgs),
    /// Discriminating margin, error bound and its empirical check.
    Bound(BoundArgs),
    /// Synthesize a comparison dataset from a model.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Comparison log (CSV).
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Item registry (CSV).
    #[arg(long, value_name = "PATH")]
    pub items: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModel {
    Bt,
    Saturated,
    Position,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub task: String,
    #[arg(long, value_enum, default_value = "bt")]
    pub model: FitModel,
    /// Arities in scope, e.g. `2,3,4`. Defaults to every arity present;
    /// saturated and position fits need exactly one.
    #[arg(long, value_delimiter = ',')]
    pub arity: Vec<usize>,
    /// Added to every item's win count (Bradley-Terry only).
    #[arg(long, default_value_t = 0.0)]
    pub pseudo_count: f64,
    /// Where to write the fitted parameters.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Restrict to one task; by default every task is tested.
    #[arg(long)]
    pub task: Option<String>,
    /// Suite rows as CSV; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Print the rows as fixed-width text tables instead of CSV.
    #[arg(long)]
    pub paper_table: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Tournament,
    Elimination,
    Condorcet,
}

#[derive(Debug, Args)]
pub struct AlgorithmArgs {
    #[arg(long, value_enum)]
    pub algorithm: Algorithm,
    /// Items per comparison.
    #[arg(long)]
    pub arity: usize,
    /// Parameter sweep: `f=...` (tournament), `T=...` (elimination) or
    /// `k=...` (Condorcet), as `start:stop:step`, a value or a list.
    #[arg(long)]
    pub sweep: Sweep,
    /// Tournament comparisons per round.
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Tournament round cap.
    #[arg(long)]
    pub max_rounds: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Curve rows as CSV; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelSource {
    /// Bradley-Terry merits for items `1..m`, e.g. `0.4,0.3,0.3`.
    #[arg(long, value_delimiter = ',')]
    pub merits: Option<Vec<f64>>,
    /// Bradley-Terry merits as `item_id,merit` rows.
    #[arg(long, value_name = "PATH")]
    pub merits_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
    #[command(flatten)]
    pub model: ModelSource,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    /// Item counted as correct; defaults to the largest merit.
    #[arg(long)]
    pub truth: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PosteriorModel {
    Bt,
    Saturated,
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub task: String,
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
    #[arg(long, value_enum, default_value = "bt")]
    pub model: PosteriorModel,
    /// Data arities the posterior conditions on. Defaults to the algorithm
    /// arity (Bradley-Terry) or every arity up to it (saturated).
    #[arg(long, value_delimiter = ',')]
    pub scope: Vec<usize>,
    /// Accepted Metropolis-Hastings steps, burn-in included.
    #[arg(long, default_value_t = 5000)]
    pub steps: u64,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: u64,
    #[arg(long, default_value_t = 4)]
    pub thin: u64,
    /// Initial random-walk step size.
    #[arg(long, default_value_t = 0.1)]
    pub step_size: f64,
    /// Saturated draws; defaults to the Metropolis-Hastings retained count.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps_per_draw: u64,
    /// Where to write the posterior draws.
    #[arg(long, value_name = "PATH")]
    pub samples_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub model: ModelSource,
    #[arg(long)]
    pub arity: usize,
    /// Thresholds, e.g. `T=20,40,80,200`.
    #[arg(long)]
    pub sweep: Sweep,
    #[arg(long, default_value_t = 2000)]
    pub reps: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Guarantee rows as CSV; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub model: ModelSource,
    #[arg(long)]
    pub task: String,
    /// Comparisons per arity, e.g. `2=155,3=135,4=158`.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub counts: Vec<(usize, usize)>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving `comparisons.csv` and `items.csv`.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Add the task to the dataset already in `out-dir`.
    #[arg(long)]
    pub append: bool,
}

fn parse_count(s: &str) -> Result<(usize, usize), String> {
    let (a, n) = s
        .split_once('=')
        .ok_or_else(|| format!("expected arity=count, got {s:?}"))?;
    let a = a.trim().parse().map_err(|_| format!("bad arity {a:?}"))?;
    let n = n.trim().parse().map_err(|_| format!("bad count {n:?}"))?;
    Ok((a, n))
}
