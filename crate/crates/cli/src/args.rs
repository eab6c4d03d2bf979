use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zsh_core::eval::{ApDenominator, DbComposition, EvalOptions, Relevance};
use zsh_core::{Affinity, GraphConfig, Hyperparameters, KernelConfig};

#[derive(Debug, Parser)]
#[command(name = "zsh", version, about = "Zero-shot hashing: train, encode, search and evaluate")]
pub struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true, env = "ZSH_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a hash model from labelled seen-category features.
    Train(TrainArgs),
    /// Hash a feature file into a code file.
    Encode(EncodeArgs),
    /// Rank database codes by Hamming distance for each query.
    Search(SearchArgs),
    /// Score query codes against a labelled code database.
    Eval(EvalArgs),
    /// Run the seen/unseen protocol end to end, optionally as a sweep.
    ExpZeroshot(ExpArgs),
    /// Print model dimensions, and the objective on data when given.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Feature file (`.csv`, anything else is read as binary).
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Label embedding table in word2vec text format.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Labels are comma-separated tag lists.
    #[arg(long)]
    pub multi_label: bool,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Code length.
    #[arg(long, default_value_t = 32)]
    pub bits: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of kernel anchors.
    #[arg(long, default_value_t = 1000)]
    pub anchors: usize,
    /// Fixed kernel bandwidth δ (default: mean squared pairwise distance).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Neighbours per item in the similarity graph.
    #[arg(long, default_value_t = 5)]
    pub knn: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value = "gaussian")]
    pub affinity: Affinity,
}

impl HyperArgs {
    pub fn hyper(&self) -> Hyperparameters {
        Hyperparameters {
            lambda: self.lambda,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            bits: self.bits,
            max_iters: self.iters,
            tol: self.tol,
            seed: self.seed,
        }
    }

    pub fn kernel(&self) -> KernelConfig {
        KernelConfig {
            anchors: self.anchors,
            bandwidth: self.bandwidth,
        }
    }

    pub fn graph(&self) -> GraphConfig {
        GraphConfig {
            k: self.knn,
            sigma: self.sigma,
            affinity: self.affinity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RelevanceArg {
    SameLabel,
    SharedTags,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Ranking depth for MAP.
    #[arg(long, default_value_t = 5000)]
    pub k: usize,
    /// Hamming radius for precision.
    #[arg(long, default_value_t = 2)]
    pub radius: u32,
    #[arg(long, default_value = "relevant")]
    pub ap_denominator: ApDenominator,
    #[arg(long, value_enum, default_value_t = RelevanceArg::SameLabel)]
    pub relevance: RelevanceArg,
    /// Shared tags needed for relevance under `shared-tags`.
    #[arg(long, default_value_t = 2)]
    pub min_shared: usize,
    /// Related label pairs; enables the related-category metrics.
    #[arg(long)]
    pub related: Option<PathBuf>,
}

impl MetricArgs {
    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            k: self.k,
            radius: self.radius,
            ap_denominator: self.ap_denominator,
            relevance: match self.relevance {
                RelevanceArg::SameLabel => Relevance::SameLabel,
                RelevanceArg::SharedTags => Relevance::SharedTags(self.min_shared),
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Seen/unseen split; training labels must all be seen.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Objective trace CSV (default: `<model>.trace.csv`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the similarity graph as `i j weight` triplets.
    #[arg(long)]
    pub dump_graph: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Labels to store alongside the codes.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub multi_label: bool,
    /// Output code file.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Code database to search.
    #[arg(long)]
    pub db: PathBuf,
    /// Query code file.
    #[arg(long, conflicts_with = "query_features")]
    pub queries: Option<PathBuf>,
    /// Query features, hashed with `--model`.
    #[arg(long, requires = "model")]
    pub query_features: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Results per query.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Skip database items whose id equals the query id.
    #[arg(long)]
    pub exclude_self: bool,
    /// Output file (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labelled code database.
    #[arg(long)]
    pub db: PathBuf,
    /// Labelled query codes.
    #[arg(long)]
    pub queries: PathBuf,
    #[command(flatten)]
    pub metrics: MetricArgs,
    /// JSON-lines report (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    UnseenCategory,
    SeenRatio,
    TrainSize,
}

#[derive(Debug, Args)]
pub struct ExpArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Seen/unseen split (required unless a sweep chooses its own).
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Training items drawn from the seen classes, or `all`.
    #[arg(long, default_value = "10000")]
    pub train_size: String,
    /// Queries drawn from the unseen classes.
    #[arg(long, default_value_t = 1000)]
    pub num_queries: usize,
    #[arg(long, default_value = "seen+unseen-rest")]
    pub db: DbComposition,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, value_enum)]
    pub sweep: Option<SweepArg>,
    /// Comma-separated sweep values.
    #[arg(long)]
    pub grid: Option<String>,
    /// Report output: JSON lines, or CSV for a sweep (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Objective trace CSV of the single experiment.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Features for the objective; needs `--labels` and `--embeddings`.
    #[arg(long, requires_all = ["labels", "embeddings"])]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub multi_label: bool,
    #[arg(long, default_value_t = 5)]
    pub knn: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value = "gaussian")]
    pub affinity: Affinity,
}
