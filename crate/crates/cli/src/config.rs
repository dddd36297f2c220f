//! Run configuration: a JSON file merged with command-line overrides.
//!
//! Precedence, highest first: command-line flags, config-file values,
//! built-in defaults. The run seed is stamped into both training configs
//! after merging, so one `seed` value governs the whole run.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use codemix::classical::{ClassicalKind, TrainConfig, DEFAULT_MLP_HIDDEN};
use codemix::features::UnkPolicy;
use codemix::neural::{BranchConfig, GridSpace, NeuralTrainConfig};
use codemix::preprocess::{load_stopwords, PreprocessConfig};

use crate::args::ConfigArgs;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub preprocess: PreprocessConfig,
    pub model: ModelSpec,
    pub training: Training,
    pub grid: GridSpace,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            paths: Paths::default(),
            preprocess: PreprocessConfig::default(),
            model: ModelSpec::default(),
            training: Training::default(),
            grid: GridSpace { lrs: vec![1e-3], n_layers: vec![1], epochs: vec![30] },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            train: None,
            valid: None,
            test: None,
            embeddings: None,
            stopwords: None,
            out_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Training {
    pub classical: TrainConfig,
    pub neural: NeuralTrainConfig,
}

/// Which model the run trains or expects in a checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelSpec {
    Classical {
        #[serde(default)]
        kind: KindSpec,
        /// Hidden width when `kind` is `mlp`; ignored otherwise.
        #[serde(default = "default_mlp_hidden")]
        mlp_hidden: usize,
        #[serde(default)]
        representation: Representation,
        /// Out-of-vocabulary handling for embedding representations.
        #[serde(default = "default_unk_policy")]
        unk_policy: UnkPolicy,
    },
    Neural {
        #[serde(default = "default_branches")]
        branches: BranchConfig,
        #[serde(default = "default_n_layers")]
        n_layers: usize,
        #[serde(default)]
        fine_tune_words: bool,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Classical {
            kind: KindSpec::default(),
            mlp_hidden: DEFAULT_MLP_HIDDEN,
            representation: Representation::default(),
            unk_policy: default_unk_policy(),
        }
    }
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Classical { .. } => "classical",
            ModelSpec::Neural { .. } => "neural",
        }
    }
}

fn default_mlp_hidden() -> usize {
    DEFAULT_MLP_HIDDEN
}

fn default_unk_policy() -> UnkPolicy {
    UnkPolicy::MeanOfAll
}

fn default_branches() -> BranchConfig {
    BranchConfig::Dual
}

fn default_n_layers() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindSpec {
    #[default]
    OvrLr,
    Svm,
    Mlp,
}

impl KindSpec {
    pub fn to_kind(self, mlp_hidden: usize) -> ClassicalKind {
        match self {
            KindSpec::OvrLr => ClassicalKind::LogisticOvR,
            KindSpec::Svm => ClassicalKind::HingeSvm,
            KindSpec::Mlp => ClassicalKind::Mlp { hidden: mlp_hidden },
        }
    }
}

/// Feature representation for classical models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// L2-normalized bag of tf-idf weights.
    #[default]
    Tfidf,
    /// Mean of the token embeddings.
    EmbeddingMean,
    /// tf-idf weighted embedding average.
    TfidfEmbedding,
}

impl Representation {
    pub fn needs_embeddings(self) -> bool {
        !matches!(self, Representation::Tfidf)
    }

    pub fn needs_tfidf(self) -> bool {
        matches!(self, Representation::Tfidf | Representation::TfidfEmbedding)
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::Tfidf => "tfidf",
            Representation::EmbeddingMean => "embedding-mean",
            Representation::TfidfEmbedding => "tfidf-embedding",
        }
    }
}

impl RunConfig {
    /// Load the config file (if any), apply flag overrides, resolve the
    /// stopword file, and check that every referenced path exists.
    pub fn load(args: &ConfigArgs) -> Result<RunConfig> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        cfg.apply(args);
        cfg.training.classical.seed = cfg.seed;
        cfg.training.neural.seed = cfg.seed;
        cfg.check_paths()?;
        if let Some(path) = &cfg.paths.stopwords {
            let file = fs::File::open(path)
                .with_context(|| format!("opening stopword file {}", path.display()))?;
            cfg.preprocess.stopwords = load_stopwords(BufReader::new(file))
                .with_context(|| format!("reading stopword file {}", path.display()))?;
        }
        cfg.preprocess
            .validate()
            .map_err(|e| anyhow::anyhow!("invalid preprocess config: {e}"))?;
        Ok(cfg)
    }

    fn apply(&mut self, args: &ConfigArgs) {
        if let Some(seed) = args.seed {
            self.seed = seed;
        }
        if let Some(out) = &args.out {
            self.paths.out_dir = out.clone();
        }
        for (flag, slot) in [
            (&args.train, &mut self.paths.train),
            (&args.valid, &mut self.paths.valid),
            (&args.test, &mut self.paths.test),
            (&args.embeddings, &mut self.paths.embeddings),
            (&args.stopwords, &mut self.paths.stopwords),
        ] {
            if let Some(path) = flag {
                *slot = Some(path.clone());
            }
        }
        if let Some(lr) = args.lr {
            self.training.classical.lr = lr;
            self.training.neural.lr = lr;
        }
        if let Some(epochs) = args.epochs {
            self.training.classical.epochs = epochs;
            self.training.neural.epochs = epochs;
        }
        if let Some(n) = args.batch_size {
            self.training.classical.batch_size = n;
            self.training.neural.batch_size = n;
        }
        if let Some(p) = args.patience {
            self.training.neural.patience = p;
        }
    }

    fn check_paths(&self) -> Result<()> {
        let referenced = [
            ("train", &self.paths.train),
            ("valid", &self.paths.valid),
            ("test", &self.paths.test),
            ("embeddings", &self.paths.embeddings),
            ("stopwords", &self.paths.stopwords),
        ];
        for (name, path) in referenced {
            if let Some(p) = path {
                if !p.exists() {
                    bail!("paths.{name} does not exist: {}", p.display());
                }
            }
        }
        Ok(())
    }

    pub fn require_train(&self) -> Result<&Path> {
        self.paths
            .train
            .as_deref()
            .context("no training file: pass --train or set paths.train")
    }

    pub fn require_embeddings(&self) -> Result<&Path> {
        self.paths
            .embeddings
            .as_deref()
            .context("no embedding file: pass --embeddings or set paths.embeddings")
    }
}

/// Create `<out_dir>/<timestamp>-seed<seed>`, suffixed when a same-name run
/// already exists, so concurrent or rapid reruns never clobber each other.
pub fn create_run_dir(out_dir: &Path, seed: u64) -> Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = format!("{stamp}-seed{seed}");
    let mut dir = out_dir.join(&base);
    let mut k = 1usize;
    while dir.exists() {
        k += 1;
        dir = out_dir.join(format!("{base}-{k}"));
    }
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating run directory {}", dir.display()))?;
    Ok(dir)
}
