//! Command-line surface. Every subcommand accepts `--config` plus the
//! override flags in [`ConfigArgs`]; flag values take precedence over the
//! config file, which takes precedence over built-in defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "codemix",
    version,
    about = "Sentiment classification for Hindi-English code-mixed tweets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a corpus file; writes the cleaned copy and a token-count summary.
    Preprocess(PreprocessArgs),
    /// Train the configured model; writes a checkpoint and a metrics log.
    Train(TrainArgs),
    /// Score a checkpoint against a labeled corpus file.
    Eval(EvalArgs),
    /// Label a corpus file with a trained checkpoint.
    Predict(PredictArgs),
    /// Train the neural model over the configured grid; keeps the best cell.
    Grid(TrainArgs),
}

/// Shared configuration flags. Precedence, highest first: these flags, the
/// `--config` file, built-in defaults.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON run configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Random seed; governs initialization, shuffling and grid cell seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parent directory for run artifacts (overrides paths.out_dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Training corpus (overrides paths.train).
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// Validation corpus (overrides paths.valid).
    #[arg(long, value_name = "FILE")]
    pub valid: Option<PathBuf>,
    /// Test corpus (overrides paths.test).
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    /// word2vec text-format embedding file (overrides paths.embeddings).
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// One-token-per-line stopword file (overrides paths.stopwords).
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Learning rate for the selected model family.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epoch budget for the selected model family.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size for the selected model family.
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,
    /// Early-stopping patience (neural training only).
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// File to clean; defaults to paths.train.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Checkpoint to evaluate.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Labeled file to score; defaults to paths.test.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// tf-idf vocabulary file; defaults to vocabulary.txt beside the
    /// checkpoint (classical models with tf-idf features only).
    #[arg(long, value_name = "FILE")]
    pub vocabulary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Checkpoint to predict with.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Corpus-format input; labels are optional and ignored.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Output file; defaults to predictions.txt in the run directory.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// tf-idf vocabulary file; defaults to vocabulary.txt beside the
    /// checkpoint (classical models with tf-idf features only).
    #[arg(long, value_name = "FILE")]
    pub vocabulary: Option<PathBuf>,
}
