use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "zymebench",
    version,
    about = "Enzyme-reaction retrieval benchmark pipeline",
    propagate_version = true
)]
pub struct Cli {
    /// Worker threads for parallel kernels (default: ZYMEBENCH_THREADS or all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate raw inputs and assemble a corpus directory.
    Ingest(IngestArgs),
    /// Produce a train/valid/test split manifest (plus an audit report).
    Split(SplitArgs),
    /// Mine similarity-guided negative pairs.
    MineNegatives(MineNegativesArgs),
    /// Export reaction feature vectors (hashed fingerprints) as a tensor.
    Featurize(FeaturizeArgs),
    /// Train the pair scorer on a split.
    Train(TrainArgs),
    /// Score the test portion of a split into a dense logit matrix.
    Score(ScoreArgs),
    /// Compute ranking/classification metrics from a score matrix.
    Evaluate(EvaluateArgs),
    /// Run the local-alignment annotation-transfer baseline on a split.
    Baseline(BaselineArgs),
    /// Merge metric reports into a fixed-layout TSV table.
    Report(ReportArgs),
    /// Generate a deterministic synthetic corpus (test fixture).
    GenCorpus(GenCorpusArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub fasta: PathBuf,
    #[arg(long)]
    pub reactions: PathBuf,
    /// Pooled per-enzyme embeddings (rows match --embedding-ids).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// JSON array of enzyme ids, one per embedding row.
    #[arg(long)]
    pub embedding_ids: Option<PathBuf>,
    /// Directory of per-enzyme residue tensors (<id>.embedding.rztf, <id>.coords.rztf).
    #[arg(long)]
    pub residue_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitKindArg {
    Time,
    EnzymeSim,
    ReactionSim,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub kind: SplitKindArg,
    /// Time-split boundary date (YYYY-MM-DD).
    #[arg(long, default_value = "2010-12-31")]
    pub boundary: String,
    /// Similarity-difference threshold for the similarity splits.
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    /// Target test fraction (defaults: 0.05 enzyme-sim, 0.09 reaction-sim).
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub valid_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the leakage audit report (default: <out>.audit.json).
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MineNegativesArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub radius: usize,
    #[arg(long, default_value_t = 2048)]
    pub nbits: usize,
    /// Output tensor (n_reactions x 2*nbits); ids go to <out>.ids.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EnzymeModeArg {
    Pooled,
    FrameAveraged,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReactionFeaturesArg {
    Graph,
    Fingerprint,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Mined negatives TSV; without it, label-0 rows of the pair table serve.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    /// JSON file with {"model": ModelConfig, "train": TrainConfig} overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub enzyme_mode: Option<EnzymeModeArg>,
    #[arg(long, value_enum)]
    pub reaction_features: Option<ReactionFeaturesArg>,
    /// Checkpoint directory (best-validation parameters).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch JSON-lines log (default: <out>/train_log.jsonl).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    EnzymeToReactions,
    ReactionToEnzymes,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = DirectionArg::EnzymeToReactions)]
    pub direction: DirectionArg,
    /// Mined negatives restrict the candidate pool; omit for the full catalog.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    /// Output tensor; row/col ids go to <out>.rows.json / <out>.cols.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = DirectionArg::EnzymeToReactions)]
    pub direction: DirectionArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = DirectionArg::EnzymeToReactions)]
    pub direction: DirectionArg,
    /// Smith-Waterman acceptance threshold as a fraction of match * min-length.
    #[arg(long, default_value_t = 0.5)]
    pub threshold_factor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// label=path pairs of report JSONs to merge.
    #[arg(long, value_name = "LABEL=PATH", num_args = 1..)]
    pub input: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenCorpusArgs {
    #[arg(long, default_value_t = 5)]
    pub families: usize,
    #[arg(long, default_value_t = 20)]
    pub per_family: usize,
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,
    #[arg(long, default_value_t = 16)]
    pub d_plm: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Spread pair dates around the 2010-12-31 boundary.
    #[arg(long)]
    pub dated: bool,
    /// Family-structured (mutated prototype) sequences.
    #[arg(long)]
    pub cluster_sequences: bool,
    /// Cross-family-dissimilar reaction strings.
    #[arg(long)]
    pub diverse_reactions: bool,
    #[arg(long)]
    pub out: PathBuf,
}
