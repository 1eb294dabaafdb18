use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairlabels::data::{Recipe, SensitiveAttr};
use fairlabels::model::BatchSize;
use fairlabels::{PrTarget, TnrTarget};

#[derive(Debug, Parser)]
#[command(
    name = "fairlabels",
    version,
    about = "Fairness-tunable classification with target labels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train fairness-unaware models and record group rates.
    Baseline(RunArgs),
    /// Train target-label models and report test metrics.
    Train(RunArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Run `train` once per grid value of the swept target.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset with known fair labels.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecipeArg {
    Adult,
    Compas,
}

impl From<RecipeArg> for Recipe {
    fn from(r: RecipeArg) -> Self {
        match r {
            RecipeArg::Adult => Recipe::Adult,
            RecipeArg::Compas => Recipe::Compas,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensitiveArg {
    Race,
    Gender,
}

impl From<SensitiveArg> for SensitiveAttr {
    fn from(s: SensitiveArg) -> Self {
        match s {
            SensitiveArg::Race => SensitiveAttr::Race,
            SensitiveArg::Gender => SensitiveAttr::Gender,
        }
    }
}

/// `dp` targets a shared positive rate, `eqopp` shared TPR/TNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fairness {
    None,
    Dp,
    Eqopp,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file to load.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON schema describing the CSV columns.
    #[arg(long, conflicts_with = "recipe", required_unless_present = "recipe")]
    pub schema: Option<PathBuf>,
    /// Built-in schema for a known dataset.
    #[arg(long, value_enum)]
    pub recipe: Option<RecipeArg>,
    /// Sensitive attribute for recipes.
    #[arg(long, value_enum, default_value = "race")]
    pub sensitive: SensitiveArg,
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    #[arg(long, value_enum, default_value = "none")]
    pub fairness: Fairness,
    /// Target positive rate: a probability or avg, min, max.
    #[arg(long, default_value = "avg", value_parser = parse_pr)]
    pub target_pr: PrTarget,
    /// Target true positive rate.
    #[arg(long)]
    pub target_tpr: Option<f64>,
    /// Target true negative rate: a probability or auto.
    #[arg(long, default_value = "auto", value_parser = parse_tnr)]
    pub target_tnr: TnrTarget,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Give the model `s` as an extra input.
    #[arg(long)]
    pub use_s: bool,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    /// `full` or a positive integer.
    #[arg(long, default_value = "full", value_parser = parse_batch)]
    pub batch_size: BatchSize,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    /// L2 coefficient; defaults to the recipe's value, else 0.
    #[arg(long)]
    pub l2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ProtocolArgs {
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub test_fraction: f64,
    /// Share of the training part held out to pick TNR targets.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Base seed; repeat i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measure baseline TNRs on the test split instead of a validation split.
    #[arg(long)]
    pub paper_protocol: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated values of the swept target (PR for dp, TPR for eqopp).
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON generator spec.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_pr(s: &str) -> Result<PrTarget, String> {
    s.parse().map_err(|e: fairlabels::Error| e.to_string())
}

fn parse_tnr(s: &str) -> Result<TnrTarget, String> {
    s.parse().map_err(|e: fairlabels::Error| e.to_string())
}

fn parse_batch(s: &str) -> Result<BatchSize, String> {
    s.parse().map_err(|e: fairlabels::Error| e.to_string())
}
