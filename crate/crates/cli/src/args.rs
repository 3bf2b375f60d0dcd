use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lsc_core::annotator::ScaleMap;
use lsc_core::dataio::ColumnAliases;
use lsc_core::geometry::AggregationMode;
use lsc_core::DistanceKind;

#[derive(Debug, Parser)]
#[command(
    name = "lsc",
    version,
    about = "Lexical semantic change detection over contextualized embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every target with a form- or sense-based measure and rank against gold scores.
    Gcd(GcdArgs),
    /// Computational annotation: judgments, usage graphs, sense clusters and graph-based change.
    Annotate(AnnotateArgs),
    /// Sweep layer combinations and aggregation modes.
    Layers(LayersArgs),
    /// Target-weighted average of a Spearman score over several reports.
    Average(AverageArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GcdMethod {
    Apd,
    Prt,
    #[value(name = "ap-jsd")]
    ApJsd,
    Widid,
}

impl GcdMethod {
    pub fn name(self) -> &'static str {
        match self {
            GcdMethod::Apd => "apd",
            GcdMethod::Prt => "prt",
            GcdMethod::ApJsd => "ap-jsd",
            GcdMethod::Widid => "widid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sum,
    #[value(alias = "concat")]
    Cat,
}

impl From<ModeArg> for AggregationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sum => AggregationMode::Sum,
            ModeArg::Cat => AggregationMode::Concat,
        }
    }
}

/// Options shared by every command that reads embeddings.
#[derive(Debug, Clone, Args)]
pub struct EmbeddingArgs {
    /// Root of `<lemma>/<period>.emb` files, or of per-layer `<k>/<lemma>/<period>.emb` trees.
    #[arg(long)]
    pub emb_dir: PathBuf,

    /// The two periods to compare, e.g. `C1,C2`. Defaults to the first two in sorted order.
    #[arg(long, value_delimiter = ',')]
    pub periods: Option<Vec<String>>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; 0 uses every core.
    #[arg(long, env = "LSC_JOBS", default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GcdArgs {
    #[arg(long, value_enum)]
    pub method: GcdMethod,

    /// Distance for APD (cosine or canberra). Other methods have a fixed distance.
    #[arg(long)]
    pub distance: Option<DistanceKind>,

    /// Layer or layer combination (`12`, `sum:9-12`, `cat:1+4`) read from per-layer directories.
    #[arg(long)]
    pub layer: Option<String>,

    #[command(flatten)]
    pub embeddings: EmbeddingArgs,

    #[arg(long)]
    pub gold: PathBuf,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub uses: PathBuf,

    /// Human judgments; their pairs are the ones judged computationally.
    #[arg(long)]
    pub judgments: PathBuf,

    #[arg(long)]
    pub layer: Option<String>,

    #[command(flatten)]
    pub embeddings: EmbeddingArgs,

    #[arg(long)]
    pub gold: Option<PathBuf>,

    /// Reference sense clusters (`identifier`, `cluster` columns).
    #[arg(long)]
    pub gold_clusters: Option<PathBuf>,

    /// Correlation-clustering threshold; defaults to the midpoint of the judgment scale.
    #[arg(long)]
    pub tau: Option<f64>,

    /// `linear:LO:HI` or `raw`.
    #[arg(long, default_value = "linear:1:4")]
    pub scale_map: ScaleMap,

    /// Random restarts of the correlation-clustering search.
    #[arg(long, default_value_t = 30)]
    pub restarts: usize,

    /// Score change as inverted mean cross-period relatedness instead of cluster JSD.
    #[arg(long)]
    pub ru_procedure: bool,

    /// Annotator id recorded on computational judgments.
    #[arg(long, default_value = "model")]
    pub annotator: String,

    /// Renames applied to uses and judgments headers, e.g. `lemma_id=lemma,grouping_id=grouping`.
    #[arg(long, default_value = "")]
    pub column_aliases: ColumnAliases,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct LayersArgs {
    #[arg(long, value_enum)]
    pub method: GcdMethod,

    #[arg(long)]
    pub distance: Option<DistanceKind>,

    #[command(flatten)]
    pub embeddings: EmbeddingArgs,

    /// Combination sizes to enumerate.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub lengths: Vec<usize>,

    #[arg(long, value_enum, value_delimiter = ',', default_value = "sum,cat")]
    pub mode: Vec<ModeArg>,

    #[arg(long)]
    pub gold: Option<PathBuf>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AverageArgs {
    /// Reports to combine; each contributes its Spearman weighted by its target count.
    #[arg(long = "report", required = true)]
    pub reports: Vec<PathBuf>,

    /// Evaluation task to average (`gcd` or `wic`).
    #[arg(long, default_value = "gcd")]
    pub task: String,

    #[arg(long)]
    pub out: PathBuf,
}
