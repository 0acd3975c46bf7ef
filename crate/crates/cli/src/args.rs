use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dpforest::{BudgetMode, SensitivityMode};

#[derive(Debug, Parser)]
#[command(
    name = "dpforest",
    version,
    about = "Differentially private random decision forests"
)]
pub struct Cli {
    /// Worker threads for training and evaluation (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Where to write the run manifest. Defaults to `<output>.manifest.json`.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Generate a synthetic dataset and its schema.
    Gen(GenArgs),
    /// Print the recommended tree depth for a schema.
    Depth(DepthArgs),
    /// Train a forest and save the model.
    Train(TrainArgs),
    /// Append predicted labels to a CSV file.
    Predict(PredictArgs),
    /// Repeated k-fold cross-validation.
    Eval(EvalArgs),
    /// Neighbor likelihood-ratio audit of one label query.
    Audit(AuditArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Depth(_) => "depth",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Eval(_) => "eval",
            Command::Audit(_) => "audit",
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("shape").required(true).args(["preset", "informative"])))]
pub struct GenArgs {
    /// Named preset, SynthA to SynthG.
    #[arg(long)]
    pub preset: Option<String>,
    /// Informative feature count (instead of a preset).
    #[arg(long, requires = "random")]
    pub informative: Option<usize>,
    /// Pure-noise feature count (instead of a preset).
    #[arg(long, requires = "informative")]
    pub random: Option<usize>,
    /// Number of records (even).
    #[arg(long, default_value_t = 30_000)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Output schema JSON.
    #[arg(long)]
    pub schema_out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DepthArgs {
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensitivity {
    Smooth,
    Global,
}

impl From<Sensitivity> for SensitivityMode {
    fn from(s: Sensitivity) -> Self {
        match s {
            Sensitivity::Smooth => SensitivityMode::Smooth,
            Sensitivity::Global => SensitivityMode::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    /// Each tree gets its own data partition and the full budget.
    Disjoint,
    /// Every tree sees all data with budget/trees.
    Split,
}

impl From<Budget> for BudgetMode {
    fn from(b: Budget) -> Self {
        match b {
            Budget::Disjoint => BudgetMode::DisjointFullBudget,
            Budget::Split => BudgetMode::SharedSplitBudget,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ForestArgs {
    /// Training CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Total privacy budget.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, default_value_t = dpforest::forest::DEFAULT_TREES)]
    pub trees: usize,
    /// Override the depth derived from the schema.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum, default_value_t = Sensitivity::Smooth)]
    pub sensitivity: Sensitivity,
    #[arg(long, value_enum, default_value_t = Budget::Disjoint)]
    pub budget: Budget,
    /// Random seed; drawn at random and recorded in the manifest if absent.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub forest: ForestArgs,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write leaf diagnostics (not private) to this JSON file.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the model's feature columns; a label column is optional.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV: the input plus a `prediction` column.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub forest: ForestArgs,
    #[arg(long, default_value_t = dpforest::eval::DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = dpforest::eval::DEFAULT_REPEATS)]
    pub repeats: usize,
    /// Report JSON. Printed to stdout if absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AuditArgs {
    /// Label counts of one leaf, e.g. "A:3,B:2".
    #[arg(long)]
    pub counts: String,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Sensitivity::Smooth)]
    pub sensitivity: Sensitivity,
    /// Report JSON. Printed to stdout if absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}
