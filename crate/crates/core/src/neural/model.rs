//! The dual-branch SS-LSTM classifier and its single-branch reductions.
//!
//! Per tweet, the char branch turns every token into a `model_dim` column via
//! char embeddings, multi-width 1-d convolutions (relu) and max-over-time
//! pooling; the word branch looks tokens up in a pretrained table (frozen by
//! default), routes out-of-vocabulary tokens to a trainable UNK vector, and
//! projects to `model_dim` when the table dimension differs. Each branch's
//! `model_dim x T` matrix runs through its own LSTM stack; the two final
//! hidden states (a disabled branch contributes zeros) are concatenated and
//! fed to a relu hidden layer and a softmax over the three classes.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::gradcheck::{check, GradCheck, GradCheckReport};
use crate::autodiff::{
    load_into_store, parse_checkpoint, read_checkpoint, render_checkpoint, Checkpoint,
    CheckpointError, Init, ParamId, ParamStore, Tape, Tensor, Var,
};
use crate::corpus::{SentimentLabel, Tweet};
use crate::features::EmbeddingTable;
use crate::scalar::Scalar;

use super::chars::{CharCnnConfig, CharVocab};
use super::lstm::{LstmLayer, PlacedLstm, LSTM_HIDDEN};

/// Which embedding branches feed the classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchConfig {
    CharOnly,
    WordOnly,
    Dual,
}

impl BranchConfig {
    pub fn uses_char(self) -> bool {
        matches!(self, BranchConfig::CharOnly | BranchConfig::Dual)
    }

    pub fn uses_word(self) -> bool {
        matches!(self, BranchConfig::WordOnly | BranchConfig::Dual)
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchConfig::CharOnly => "char-only",
            BranchConfig::WordOnly => "word-only",
            BranchConfig::Dual => "dual",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "char-only" => Some(BranchConfig::CharOnly),
            "word-only" => Some(BranchConfig::WordOnly),
            "dual" => Some(BranchConfig::Dual),
            _ => None,
        }
    }
}

/// Branch selector for operations that work on one branch at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Char,
    Word,
}

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error("the word branch requires an embedding table")]
    MissingEmbeddings,
    #[error("the {0:?} branch is disabled in this model")]
    BranchDisabled(Branch),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("tweet {id} has no label; training data must be labeled")]
    UnlabeledTweet { id: String },
    #[error("grid-search space is empty")]
    EmptyGrid,
    #[error("checkpoint mismatch: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Full model shape. `model_dim` is the per-token column length both
/// branches emit; it must equal the char CNN's `output_dim`.
#[derive(Debug, Clone)]
pub struct SsLstmConfig {
    pub branches: BranchConfig,
    pub char_cnn: CharCnnConfig,
    pub model_dim: usize,
    pub hidden: usize,
    pub fc_hidden: usize,
    pub n_layers: usize,
    pub fine_tune_words: bool,
}

impl SsLstmConfig {
    /// Paper-shaped defaults: d = 256, H = 128, one LSTM layer per branch,
    /// 64-unit relu head, frozen word table.
    pub fn new(branches: BranchConfig, char_vocab: CharVocab) -> Self {
        SsLstmConfig {
            branches,
            char_cnn: CharCnnConfig::new(char_vocab),
            model_dim: 256,
            hidden: LSTM_HIDDEN,
            fc_hidden: 64,
            n_layers: 1,
            fine_tune_words: false,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        self.char_cnn.validate().map_err(NeuralError::BadConfig)?;
        if self.char_cnn.output_dim != self.model_dim {
            return Err(NeuralError::BadConfig(format!(
                "char cnn emits {} but model_dim is {}",
                self.char_cnn.output_dim, self.model_dim
            )));
        }
        if self.hidden == 0 || self.fc_hidden == 0 {
            return Err(NeuralError::BadConfig("hidden sizes must be >= 1".into()));
        }
        if self.n_layers == 0 {
            return Err(NeuralError::BadConfig("n_layers must be >= 1".into()));
        }
        Ok(())
    }
}

struct CharParams {
    emb: ParamId,
    convs: Vec<(usize, ParamId, ParamId)>,
    layers: Vec<LstmLayer>,
}

struct WordParams<S: Scalar> {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vocab_hash: u64,
    /// Frozen table values; `None` when the table is a trainable parameter.
    frozen: Option<Tensor<S>>,
    table_param: Option<ParamId>,
    unk: ParamId,
    proj: Option<ParamId>,
    layers: Vec<LstmLayer>,
}

struct HeadParams {
    fc_w: ParamId,
    fc_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

pub struct SsLstmModel<S: Scalar> {
    pub cfg: SsLstmConfig,
    pub store: ParamStore<S>,
    chars: Option<CharParams>,
    words: Option<WordParams<S>>,
    head: HeadParams,
}

fn fnv64_tokens(tokens: &[String]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for t in tokens {
        for b in t.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn table_matrix<S: Scalar>(table: &EmbeddingTable<S>) -> Tensor<S> {
    let (d, v) = (table.dim(), table.len());
    let mut m = Tensor::zeros(&[d, v]);
    for (j, token) in table.tokens().iter().enumerate() {
        let vec = table.lookup(token).expect("token from table order");
        for (i, &x) in vec.iter().enumerate() {
            m.set2(i, j, x);
        }
    }
    m
}

impl<S: Scalar> SsLstmModel<S> {
    /// Build a model with freshly initialized parameters. `word_table` is
    /// required exactly when the word branch is enabled; its vectors become
    /// the frozen lookup table (or the initial value of a trainable one).
    pub fn new(
        cfg: SsLstmConfig,
        word_table: Option<&EmbeddingTable<S>>,
        seed: u64,
    ) -> Result<Self, NeuralError> {
        cfg.validate()?;
        if cfg.branches.uses_word() && word_table.is_none() {
            return Err(NeuralError::MissingEmbeddings);
        }
        if let Some(t) = word_table {
            if t.is_empty() {
                return Err(NeuralError::BadConfig("embedding table is empty".into()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store: ParamStore<S> = ParamStore::new();

        let chars = if cfg.branches.uses_char() {
            let cc = &cfg.char_cnn;
            let emb = store.register(
                "char_emb",
                &[cc.char_emb_dim, cc.vocab.len()],
                Init::Uniform { low: -0.1, high: 0.1 },
                &mut rng,
            );
            let mut convs = Vec::new();
            for (&width, &n_filters) in cc.filter_widths.iter().zip(&cc.filters_per_width) {
                let w = store.register(
                    &format!("char_conv{width}_w"),
                    &[n_filters, cc.char_emb_dim, width],
                    Init::GlorotUniform {
                        fan_in: cc.char_emb_dim * width,
                        fan_out: n_filters,
                    },
                    &mut rng,
                );
                let b = store.register(
                    &format!("char_conv{width}_b"),
                    &[n_filters],
                    Init::Zeros,
                    &mut rng,
                );
                convs.push((width, w, b));
            }
            let layers = register_stack(&mut store, "char", &cfg, &mut rng);
            Some(CharParams { emb, convs, layers })
        } else {
            None
        };

        let words = if cfg.branches.uses_word() {
            let table = word_table.expect("checked above");
            let dim = table.dim();
            let tokens = table.tokens().to_vec();
            let index = tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i))
                .collect();
            let vocab_hash = fnv64_tokens(&tokens);
            let matrix = table_matrix(table);
            let (frozen, table_param) = if cfg.fine_tune_words {
                (None, Some(store.register_tensor("word_table", matrix)))
            } else {
                (Some(matrix), None)
            };
            let unk = store.register(
                "word_unk",
                &[dim],
                Init::Uniform { low: -0.1, high: 0.1 },
                &mut rng,
            );
            let proj = (dim != cfg.model_dim).then(|| {
                store.register(
                    "word_proj",
                    &[cfg.model_dim, dim],
                    Init::GlorotUniform { fan_in: dim, fan_out: cfg.model_dim },
                    &mut rng,
                )
            });
            let layers = register_stack(&mut store, "word", &cfg, &mut rng);
            Some(WordParams {
                tokens,
                index,
                dim,
                vocab_hash,
                frozen,
                table_param,
                unk,
                proj,
                layers,
            })
        } else {
            None
        };

        let concat_dim = 2 * cfg.hidden;
        let head = HeadParams {
            fc_w: store.register(
                "fc_w",
                &[cfg.fc_hidden, concat_dim],
                Init::GlorotUniform { fan_in: concat_dim, fan_out: cfg.fc_hidden },
                &mut rng,
            ),
            fc_b: store.register("fc_b", &[cfg.fc_hidden], Init::Zeros, &mut rng),
            out_w: store.register(
                "out_w",
                &[3, cfg.fc_hidden],
                Init::GlorotUniform { fan_in: cfg.fc_hidden, fan_out: 3 },
                &mut rng,
            ),
            out_b: store.register("out_b", &[3], Init::Zeros, &mut rng),
        };

        Ok(SsLstmModel { cfg, store, chars, words, head })
    }

    pub fn n_parameters(&self) -> usize {
        self.store.total_elements()
    }

    /// Tokens of the word table, in column order (empty without the branch).
    pub fn word_tokens(&self) -> &[String] {
        self.words.as_ref().map_or(&[], |w| &w.tokens)
    }

    /// Copy parameters onto `tape` for one forward pass. `store` is normally
    /// `self.store`; the gradient checker passes its own perturbed copy.
    pub(crate) fn place(&self, tape: &mut Tape<S>, store: &ParamStore<S>) -> PlacedModel {
        let chars = self.chars.as_ref().map(|cp| PlacedChar {
            emb: store.var(tape, cp.emb),
            convs: cp
                .convs
                .iter()
                .map(|&(w, wid, bid)| (w, store.var(tape, wid), store.var(tape, bid)))
                .collect(),
            layers: cp.layers.iter().map(|l| l.place(tape, store)).collect(),
        });
        let words = self.words.as_ref().map(|wp| PlacedWord {
            table: match (&wp.frozen, wp.table_param) {
                (Some(frozen), _) => tape.constant(frozen.clone()),
                (None, Some(id)) => store.var(tape, id),
                (None, None) => unreachable!("word table is either frozen or a parameter"),
            },
            unk: store.var(tape, wp.unk),
            proj: wp.proj.map(|id| store.var(tape, id)),
            layers: wp.layers.iter().map(|l| l.place(tape, store)).collect(),
        });
        PlacedModel {
            chars,
            words,
            fc_w: store.var(tape, self.head.fc_w),
            fc_b: store.var(tape, self.head.fc_b),
            out_w: store.var(tape, self.head.out_w),
            out_b: store.var(tape, self.head.out_b),
        }
    }

    fn char_column(&self, tape: &mut Tape<S>, placed: &PlacedChar, token: &str) -> Var {
        let ixs = self.cfg.char_cnn.vocab.indices(token);
        let embedded = tape.select_columns(placed.emb, &ixs);
        let mut pooled: Option<Var> = None;
        for &(_, w, b) in &placed.convs {
            let conv = tape.conv1d(embedded, w);
            let bias = tape.stack_columns(&vec![b; ixs.len()]);
            let z = tape.add(conv, bias);
            let a = tape.relu(z);
            let p = tape.maxpool_time(a);
            pooled = Some(match pooled {
                None => p,
                Some(prev) => tape.concat_rows(prev, p),
            });
        }
        pooled.expect("at least one filter width")
    }

    fn word_column(&self, tape: &mut Tape<S>, placed: &PlacedWord, token: &str) -> Var {
        let wp = self.words.as_ref().expect("placed word implies params");
        let base = match wp.index.get(token) {
            Some(&ix) => {
                let col = tape.select_columns(placed.table, &[ix]);
                tape.reshape(col, &[wp.dim])
            }
            None => placed.unk,
        };
        match placed.proj {
            Some(p) => tape.matmul(p, base),
            None => base,
        }
    }

    /// Column lists for one tweet, padded with zero columns up to `pad_to`.
    fn branch_columns(
        &self,
        tape: &mut Tape<S>,
        placed: &PlacedModel,
        branch: Branch,
        texts: &[&str],
        pad_to: usize,
    ) -> Vec<Var> {
        let mut cols: Vec<Var> = match branch {
            Branch::Char => {
                let pc = placed.chars.as_ref().expect("char branch enabled");
                texts.iter().map(|t| self.char_column(tape, pc, t)).collect()
            }
            Branch::Word => {
                let pw = placed.words.as_ref().expect("word branch enabled");
                texts.iter().map(|t| self.word_column(tape, pw, t)).collect()
            }
        };
        if pad_to > cols.len() {
            let zero = tape.constant(Tensor::zeros(&[self.cfg.model_dim]));
            cols.resize(pad_to, zero);
        }
        cols
    }

    fn run_stack(
        &self,
        tape: &mut Tape<S>,
        layers: &[PlacedLstm],
        columns: Vec<Var>,
        n_real: usize,
    ) -> Var {
        let mut seq = columns;
        let mut n = n_real;
        for layer in layers {
            seq = layer.run(tape, &seq, n);
            n = seq.len();
        }
        *seq.last().expect("n_real >= 1")
    }

    /// Record the full forward pass for one tweet and return the `[3]`
    /// probability node. `pad_to >= texts.len()` appends masked padding
    /// steps; masking a branch zeroes its 128-vector before concatenation.
    pub(crate) fn forward_on_tape(
        &self,
        tape: &mut Tape<S>,
        placed: &PlacedModel,
        texts: &[&str],
        pad_to: usize,
        mask_char: bool,
        mask_word: bool,
    ) -> Var {
        assert!(!texts.is_empty(), "a tweet has at least one token");
        assert!(pad_to >= texts.len(), "pad_to shorter than the tweet");
        let n_real = texts.len();

        let zero_branch = |tape: &mut Tape<S>| tape.constant(Tensor::zeros(&[self.cfg.hidden]));
        let c = if let Some(pc) = &placed.chars {
            let cols = self.branch_columns(tape, placed, Branch::Char, texts, pad_to);
            let h = self.run_stack(tape, &pc.layers, cols, n_real);
            if mask_char {
                tape.scale(h, S::zero())
            } else {
                h
            }
        } else {
            zero_branch(tape)
        };
        let w = if let Some(pw) = &placed.words {
            let cols = self.branch_columns(tape, placed, Branch::Word, texts, pad_to);
            let h = self.run_stack(tape, &pw.layers, cols, n_real);
            if mask_word {
                tape.scale(h, S::zero())
            } else {
                h
            }
        } else {
            zero_branch(tape)
        };

        let o = tape.concat_rows(c, w);
        let z1 = tape.matmul(placed.fc_w, o);
        let z1 = tape.add(z1, placed.fc_b);
        let h1 = tape.relu(z1);
        let z2 = tape.matmul(placed.out_w, h1);
        let z2 = tape.add(z2, placed.out_b);
        tape.softmax(z2)
    }

    fn texts(tweet: &Tweet) -> Vec<&str> {
        tweet.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Probabilities for the three classes, in label-index order.
    pub fn forward(&self, tweet: &Tweet) -> Tensor<S> {
        self.forward_padded(tweet, tweet.tokens.len())
    }

    /// Same as [`SsLstmModel::forward`] but with masked padding appended up
    /// to `pad_to` steps.
    pub fn forward_padded(&self, tweet: &Tweet, pad_to: usize) -> Tensor<S> {
        let mut tape: Tape<S> = Tape::new();
        let placed = self.place(&mut tape, &self.store);
        let texts = Self::texts(tweet);
        let probs = self.forward_on_tape(&mut tape, &placed, &texts, pad_to, false, false);
        tape.value(probs).clone()
    }

    /// Forward with one or both branch outputs forced to zero; exposes the
    /// claim that a single-branch model is the dual model with the other
    /// branch disabled.
    pub fn forward_masked(&self, tweet: &Tweet, mask_char: bool, mask_word: bool) -> Tensor<S> {
        let mut tape: Tape<S> = Tape::new();
        let placed = self.place(&mut tape, &self.store);
        let texts = Self::texts(tweet);
        let probs =
            self.forward_on_tape(&mut tape, &placed, &texts, texts.len(), mask_char, mask_word);
        tape.value(probs).clone()
    }

    pub fn predict(&self, tweet: &Tweet) -> SentimentLabel {
        let probs = self.forward(tweet);
        let data = probs.data();
        let mut best = 0;
        for c in 1..3 {
            if data[c] > data[best] {
                best = c;
            }
        }
        SentimentLabel::from_index(best).expect("three classes")
    }

    /// Batch inference; pure, data-parallel across tweets, order-preserving.
    pub fn predict_batch(&self, tweets: &[Tweet]) -> Vec<SentimentLabel> {
        tweets.par_iter().map(|t| self.predict(t)).collect()
    }

    /// Char branch embedding matrix, `[model_dim, T]`, one column per token.
    pub fn embed_chars(&self, tweet: &Tweet) -> Result<Tensor<S>, NeuralError> {
        if self.chars.is_none() {
            return Err(NeuralError::BranchDisabled(Branch::Char));
        }
        let mut tape: Tape<S> = Tape::new();
        let placed = self.place(&mut tape, &self.store);
        let texts = Self::texts(tweet);
        let cols = self.branch_columns(&mut tape, &placed, Branch::Char, &texts, texts.len());
        let m = tape.stack_columns(&cols);
        Ok(tape.value(m).clone())
    }

    /// Word branch embedding matrix, `[model_dim, T]`, one column per token.
    pub fn embed_words(&self, tweet: &Tweet) -> Result<Tensor<S>, NeuralError> {
        if self.words.is_none() {
            return Err(NeuralError::BranchDisabled(Branch::Word));
        }
        let mut tape: Tape<S> = Tape::new();
        let placed = self.place(&mut tape, &self.store);
        let texts = Self::texts(tweet);
        let cols = self.branch_columns(&mut tape, &placed, Branch::Word, &texts, texts.len());
        let m = tape.stack_columns(&cols);
        Ok(tape.value(m).clone())
    }

    /// Run one branch's LSTM stack over an embedding matrix `[model_dim, T]`
    /// and return the final hidden state `[hidden]`.
    pub fn lstm_last_hidden(
        &self,
        branch: Branch,
        matrix: &Tensor<S>,
    ) -> Result<Tensor<S>, NeuralError> {
        let layers = match branch {
            Branch::Char => &self.chars.as_ref().ok_or(NeuralError::BranchDisabled(branch))?.layers,
            Branch::Word => &self.words.as_ref().ok_or(NeuralError::BranchDisabled(branch))?.layers,
        };
        assert_eq!(matrix.ndim(), 2, "embedding matrix must be 2-d");
        assert_eq!(
            matrix.rows(),
            self.cfg.model_dim,
            "embedding matrix has {} rows, model_dim is {}",
            matrix.rows(),
            self.cfg.model_dim
        );
        let t = matrix.cols();
        assert!(t >= 1, "embedding matrix needs at least one column");
        let mut tape: Tape<S> = Tape::new();
        let placed: Vec<PlacedLstm> = layers.iter().map(|l| l.place(&mut tape, &self.store)).collect();
        let cols: Vec<Var> = (0..t)
            .map(|j| {
                let col: Vec<S> = (0..matrix.rows()).map(|i| matrix.at2(i, j)).collect();
                tape.constant(Tensor::vector(col))
            })
            .collect();
        let h = self.run_stack(&mut tape, &placed, cols, t);
        Ok(tape.value(h).clone())
    }

    fn meta(&self) -> Vec<(String, String)> {
        let cc = &self.cfg.char_cnn;
        let join = |xs: &[usize]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut meta = vec![
            ("model".to_string(), "ss-lstm".to_string()),
            ("branches".to_string(), self.cfg.branches.name().to_string()),
            ("model_dim".to_string(), self.cfg.model_dim.to_string()),
            ("hidden".to_string(), self.cfg.hidden.to_string()),
            ("fc_hidden".to_string(), self.cfg.fc_hidden.to_string()),
            ("n_layers".to_string(), self.cfg.n_layers.to_string()),
            ("fine_tune_words".to_string(), self.cfg.fine_tune_words.to_string()),
            ("char_emb_dim".to_string(), cc.char_emb_dim.to_string()),
            ("filter_widths".to_string(), join(&cc.filter_widths)),
            ("filters_per_width".to_string(), join(&cc.filters_per_width)),
            (
                "char_vocab_hash".to_string(),
                format!("{:016x}", cc.vocab.hash64()),
            ),
            (
                "char_vocab".to_string(),
                cc.vocab.chars()[1..].iter().collect::<String>(),
            ),
        ];
        if let Some(wp) = &self.words {
            meta.push(("word_dim".to_string(), wp.dim.to_string()));
            meta.push(("word_vocab_len".to_string(), wp.tokens.len().to_string()));
            meta.push((
                "word_vocab_hash".to_string(),
                format!("{:016x}", wp.vocab_hash),
            ));
        }
        meta
    }

    pub fn to_checkpoint_string(&self) -> String {
        render_checkpoint(&self.store, &self.meta())
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_checkpoint_string()).map_err(CheckpointError::Io)?;
        Ok(())
    }

    /// Rebuild a model from checkpoint text. The embedding table must be the
    /// same one used at training time (checked by token hash) and is required
    /// exactly when the word branch is enabled.
    pub fn from_checkpoint_str(
        text: &str,
        word_table: Option<&EmbeddingTable<S>>,
    ) -> Result<Self, NeuralError> {
        Self::from_checkpoint(&parse_checkpoint(text)?, word_table)
    }

    pub fn load(path: &Path, word_table: Option<&EmbeddingTable<S>>) -> Result<Self, NeuralError> {
        Self::from_checkpoint(&read_checkpoint(path)?, word_table)
    }

    pub fn from_checkpoint(
        ckpt: &Checkpoint<S>,
        word_table: Option<&EmbeddingTable<S>>,
    ) -> Result<Self, NeuralError> {
        let get = |key: &str| {
            ckpt.meta_value(key)
                .ok_or_else(|| NeuralError::BadCheckpoint(format!("missing meta key {key}")))
        };
        let parse_num = |key: &str| -> Result<usize, NeuralError> {
            get(key)?
                .parse()
                .map_err(|_| NeuralError::BadCheckpoint(format!("meta {key} is not a number")))
        };
        let parse_list = |key: &str| -> Result<Vec<usize>, NeuralError> {
            get(key)?
                .split(',')
                .map(|f| {
                    f.parse().map_err(|_| {
                        NeuralError::BadCheckpoint(format!("meta {key} holds a bad number"))
                    })
                })
                .collect()
        };

        let model = get("model")?;
        if model != "ss-lstm" {
            return Err(NeuralError::BadCheckpoint(format!(
                "expected an ss-lstm checkpoint, found model {model:?}"
            )));
        }
        let branches_name = get("branches")?;
        let branches = BranchConfig::from_name(branches_name).ok_or_else(|| {
            NeuralError::BadCheckpoint(format!("unknown branches value {branches_name:?}"))
        })?;
        let vocab = CharVocab::from_ordered_chars(get("char_vocab")?.chars());
        let stored_hash = get("char_vocab_hash")?.to_string();
        if format!("{:016x}", vocab.hash64()) != stored_hash {
            return Err(NeuralError::BadCheckpoint(
                "char vocabulary hash does not match its character list".into(),
            ));
        }
        let cfg = SsLstmConfig {
            branches,
            char_cnn: CharCnnConfig {
                vocab,
                char_emb_dim: parse_num("char_emb_dim")?,
                filter_widths: parse_list("filter_widths")?,
                filters_per_width: parse_list("filters_per_width")?,
                output_dim: parse_num("model_dim")?,
            },
            model_dim: parse_num("model_dim")?,
            hidden: parse_num("hidden")?,
            fc_hidden: parse_num("fc_hidden")?,
            n_layers: parse_num("n_layers")?,
            fine_tune_words: get("fine_tune_words")? == "true",
        };
        if cfg.branches.uses_word() {
            let table = word_table.ok_or(NeuralError::MissingEmbeddings)?;
            let expected_hash = get("word_vocab_hash")?;
            let actual = format!("{:016x}", fnv64_tokens(table.tokens()));
            if actual != expected_hash {
                return Err(NeuralError::BadCheckpoint(format!(
                    "embedding table hash {actual} does not match checkpoint {expected_hash}; \
                     supply the table the model was trained with"
                )));
            }
            let dim = parse_num("word_dim")?;
            if table.dim() != dim {
                return Err(NeuralError::BadCheckpoint(format!(
                    "embedding table dim {} does not match checkpoint {dim}",
                    table.dim()
                )));
            }
        }
        let mut model = Self::new(cfg, word_table, 0)?;
        load_into_store(ckpt, &mut model.store)?;
        Ok(model)
    }
}

impl SsLstmModel<f64> {
    /// Compare tape gradients of the one-example cross-entropy loss against
    /// central finite differences. The parameter store is perturbed in place
    /// during the sweep and restored before returning.
    pub fn gradient_check(
        &mut self,
        cfg: &GradCheck,
        tweet: &Tweet,
        gold: SentimentLabel,
    ) -> GradCheckReport {
        let texts = Self::texts(tweet);
        let mut store = std::mem::replace(&mut self.store, ParamStore::new());
        let report = check(cfg, &mut store, |store, tape| {
            let placed = self.place(tape, store);
            let probs = self.forward_on_tape(tape, &placed, &texts, texts.len(), false, false);
            tape.cross_entropy(probs, gold.index())
        });
        self.store = store;
        report
    }
}

fn register_stack<S: Scalar>(
    store: &mut ParamStore<S>,
    branch: &str,
    cfg: &SsLstmConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<LstmLayer> {
    (0..cfg.n_layers)
        .map(|k| {
            let input_dim = if k == 0 { cfg.model_dim } else { cfg.hidden };
            LstmLayer::register(store, &format!("{branch}_l{k}"), input_dim, cfg.hidden, rng)
        })
        .collect()
}

pub(crate) struct PlacedModel {
    pub chars: Option<PlacedChar>,
    pub words: Option<PlacedWord>,
    fc_w: Var,
    fc_b: Var,
    out_w: Var,
    out_b: Var,
}

pub(crate) struct PlacedChar {
    emb: Var,
    convs: Vec<(usize, Var, Var)>,
    pub layers: Vec<PlacedLstm>,
}

pub(crate) struct PlacedWord {
    table: Var,
    unk: Var,
    proj: Option<Var>,
    pub layers: Vec<PlacedLstm>,
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use crate::corpus::{LangTag, Token};
    use crate::features::UnkPolicy;

    use super::*;

    fn tweet(tokens: &[&str]) -> Tweet {
        Tweet {
            id: "t0".to_string(),
            label: None,
            tokens: tokens
                .iter()
                .map(|t| Token { text: t.to_string(), lang: LangTag::Eng })
                .collect(),
        }
    }

    /// Small dims so tests stay fast; shape logic is dimension-generic.
    fn small_cfg(branches: BranchConfig, texts: &[&str]) -> SsLstmConfig {
        let vocab = CharVocab::from_texts(texts.iter().copied());
        let mut cfg = SsLstmConfig::new(branches, vocab);
        cfg.model_dim = 12;
        cfg.hidden = 5;
        cfg.fc_hidden = 6;
        cfg.char_cnn.char_emb_dim = 4;
        cfg.char_cnn.output_dim = 12;
        cfg.char_cnn.filter_widths = vec![2, 3];
        cfg.char_cnn.filters_per_width = vec![6, 6];
        cfg
    }

    fn small_table(dim: usize, tokens: &[&str], seed: u64) -> EmbeddingTable<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EmbeddingTable::from_pairs(
            dim,
            tokens.iter().map(|t| {
                let v = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                (t.to_string(), v)
            }),
            UnkPolicy::TrainableUnk,
        )
    }

    #[test]
    fn shapes_flow_as_declared() {
        let texts = ["achha", "din", "tha"];
        let cfg = small_cfg(BranchConfig::Dual, &texts);
        let table = small_table(12, &["achha", "din"], 1);
        let model = SsLstmModel::<f64>::new(cfg, Some(&table), 7).unwrap();
        let tw = tweet(&texts);

        let cm = model.embed_chars(&tw).unwrap();
        assert_eq!(cm.shape(), &[12, 3]);
        let wm = model.embed_words(&tw).unwrap();
        assert_eq!(wm.shape(), &[12, 3]);
        let ch = model.lstm_last_hidden(Branch::Char, &cm).unwrap();
        assert_eq!(ch.shape(), &[5]);
        let probs = model.forward(&tw);
        assert_eq!(probs.shape(), &[3]);
        let sum: f64 = probs.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zeroed_head_is_uniform() {
        let texts = ["kya", "baat"];
        let cfg = small_cfg(BranchConfig::CharOnly, &texts);
        let mut model = SsLstmModel::<f64>::new(cfg, None, 3).unwrap();
        for name in ["out_w", "out_b"] {
            let id = model.store.id(name).unwrap();
            for v in model.store.value_mut(id).data_mut() {
                *v = 0.0;
            }
        }
        let probs = model.forward(&tweet(&texts));
        for p in probs.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn word_columns_match_table_under_identity_projection() {
        let texts = ["one", "two", "unseen"];
        let mut cfg = small_cfg(BranchConfig::WordOnly, &texts);
        cfg.model_dim = 12;
        let table = small_table(12, &["one", "two"], 5);
        let model = SsLstmModel::<f64>::new(cfg, Some(&table), 9).unwrap();
        let m = model.embed_words(&tweet(&texts)).unwrap();
        // In-vocab columns equal the stored vectors exactly.
        for (j, tok) in ["one", "two"].iter().enumerate() {
            let stored = table.lookup(tok).unwrap();
            for i in 0..12 {
                assert_eq!(m.at2(i, j), stored[i]);
            }
        }
        // The OOV column is the trainable UNK vector.
        let unk = model.store.value(model.store.id("word_unk").unwrap());
        for i in 0..12 {
            assert_eq!(m.at2(i, 2), unk.data()[i]);
        }
    }

    #[test]
    fn projection_reshapes_foreign_dims() {
        let texts = ["a", "b"];
        let cfg = small_cfg(BranchConfig::WordOnly, &texts);
        // Table dim 7 != model_dim 12 forces a projection.
        let table = small_table(7, &["a"], 2);
        let model = SsLstmModel::<f64>::new(cfg, Some(&table), 4).unwrap();
        assert!(model.store.id("word_proj").is_some());
        let m = model.embed_words(&tweet(&texts)).unwrap();
        assert_eq!(m.shape(), &[12, 2]);
        let probs = model.forward(&tweet(&texts));
        let sum: f64 = probs.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unseen_script_and_emoji_stay_finite() {
        let cfg = small_cfg(BranchConfig::Dual, &["ordinary", "words"]);
        let table = small_table(12, &["ordinary"], 8);
        let model = SsLstmModel::<f64>::new(cfg, Some(&table), 2).unwrap();
        let tw = tweet(&["\u{0928}\u{092E}\u{0938}\u{094D}\u{0924}\u{0947}", "\u{1F600}", "zzz"]);
        let probs = model.forward(&tw);
        assert!(probs.all_finite());
        let sum: f64 = probs.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let cm = model.embed_chars(&tw).unwrap();
        assert!(cm.all_finite());
    }

    #[test]
    fn masked_padding_changes_nothing() {
        let texts = ["thoda", "sa", "pyaar"];
        let cfg = small_cfg(BranchConfig::Dual, &texts);
        let table = small_table(12, &["thoda", "sa"], 3);
        let model = SsLstmModel::<f64>::new(cfg, Some(&table), 11).unwrap();
        let tw = tweet(&texts);
        let plain = model.forward(&tw);
        for pad in [3, 4, 8, 20] {
            let padded = model.forward_padded(&tw, pad);
            assert_eq!(plain, padded, "padding to {pad} changed the output");
        }
    }

    #[test]
    fn single_branch_equals_masked_dual() {
        let texts = ["ek", "do", "teen"];
        let cfg = small_cfg(BranchConfig::Dual, &texts);
        let table = small_table(12, &["ek", "do"], 6);
        let dual = SsLstmModel::<f64>::new(cfg, Some(&table), 13).unwrap();

        let char_cfg = small_cfg(BranchConfig::CharOnly, &texts);
        let mut char_only = SsLstmModel::<f64>::new(char_cfg, None, 99).unwrap();
        // Same names exist in both models for the shared parts.
        let shared: Vec<String> = char_only
            .store
            .iter()
            .map(|(_, name, _)| name.to_string())
            .collect();
        for name in shared {
            let from = dual.store.value(dual.store.id(&name).unwrap()).clone();
            let id = char_only.store.id(&name).unwrap();
            *char_only.store.value_mut(id) = from;
        }

        let tw = tweet(&texts);
        let masked = dual.forward_masked(&tw, false, true);
        let single = char_only.forward(&tw);
        assert_eq!(masked, single);

        // And the word side, mirrored.
        let word_cfg = small_cfg(BranchConfig::WordOnly, &texts);
        let mut word_only = SsLstmModel::<f64>::new(word_cfg, Some(&table), 98).unwrap();
        let shared: Vec<String> = word_only
            .store
            .iter()
            .map(|(_, name, _)| name.to_string())
            .collect();
        for name in shared {
            let from = dual.store.value(dual.store.id(&name).unwrap()).clone();
            let id = word_only.store.id(&name).unwrap();
            *word_only.store.value_mut(id) = from;
        }
        let masked = dual.forward_masked(&tw, true, false);
        let single = word_only.forward(&tw);
        assert_eq!(masked, single);
    }

    #[test]
    fn disabled_branch_ops_error() {
        let cfg = small_cfg(BranchConfig::CharOnly, &["x"]);
        let model = SsLstmModel::<f64>::new(cfg, None, 0).unwrap();
        assert!(matches!(
            model.embed_words(&tweet(&["x"])),
            Err(NeuralError::BranchDisabled(Branch::Word))
        ));
        let cfg = small_cfg(BranchConfig::WordOnly, &["x"]);
        let table = small_table(12, &["x"], 0);
        let model = SsLstmModel::<f64>::new(cfg, Some(&table), 0).unwrap();
        assert!(matches!(
            model.embed_chars(&tweet(&["x"])),
            Err(NeuralError::BranchDisabled(Branch::Char))
        ));
    }

    #[test]
    fn word_branch_without_table_is_an_error() {
        let cfg = small_cfg(BranchConfig::Dual, &["x"]);
        assert!(matches!(
            SsLstmModel::<f64>::new(cfg, None, 0),
            Err(NeuralError::MissingEmbeddings)
        ));
    }

    #[test]
    fn same_seed_same_parameters() {
        let texts = ["seeded", "init"];
        let cfg = small_cfg(BranchConfig::Dual, &texts);
        let table = small_table(12, &texts, 21);
        let a = SsLstmModel::<f64>::new(cfg.clone(), Some(&table), 5).unwrap();
        let b = SsLstmModel::<f64>::new(cfg, Some(&table), 5).unwrap();
        for (ida, name, va) in a.store.iter() {
            let _ = ida;
            let vb = b.store.value(b.store.id(name).unwrap());
            assert_eq!(va, vb, "parameter {name} differs");
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_outputs() {
        let texts = ["roundtrip", "works"];
        let cfg = small_cfg(BranchConfig::Dual, &texts);
        let table = small_table(7, &texts, 30);
        let model = SsLstmModel::<f64>::new(cfg, Some(&table), 17).unwrap();
        let tw = tweet(&["roundtrip", "novel"]);
        let before = model.forward(&tw);

        let text = model.to_checkpoint_string();
        let loaded = SsLstmModel::<f64>::from_checkpoint_str(&text, Some(&table)).unwrap();
        let after = loaded.forward(&tw);
        assert_eq!(before, after);
        // Re-render: byte identical.
        assert_eq!(loaded.to_checkpoint_string(), text);
    }

    #[test]
    fn checkpoint_rejects_wrong_table() {
        let texts = ["strict", "hash"];
        let cfg = small_cfg(BranchConfig::WordOnly, &texts);
        let table = small_table(7, &texts, 40);
        let model = SsLstmModel::<f64>::new(cfg, Some(&table), 1).unwrap();
        let text = model.to_checkpoint_string();

        let other = small_table(7, &["different", "tokens"], 41);
        assert!(matches!(
            SsLstmModel::<f64>::from_checkpoint_str(&text, Some(&other)),
            Err(NeuralError::BadCheckpoint(_))
        ));
        assert!(matches!(
            SsLstmModel::<f64>::from_checkpoint_str(&text, None),
            Err(NeuralError::MissingEmbeddings)
        ));
    }

    #[test]
    fn gradcheck_all_branch_configurations() {
        let texts = ["grad", "check", "hai"];
        let table = small_table(7, &["grad", "check"], 50);
        for branches in [BranchConfig::CharOnly, BranchConfig::WordOnly, BranchConfig::Dual] {
            let cfg = small_cfg(branches, &texts);
            let word = branches.uses_word().then_some(&table);
            let mut model = SsLstmModel::<f64>::new(cfg, word, 23).unwrap();
            let tw = tweet(&["grad", "novel", "hai"]);
            let snap = model.store.snapshot();
            let gc = GradCheck { max_per_param: 4, ..GradCheck::default() };
            let report = model.gradient_check(&gc, &tw, SentimentLabel::Negative);
            assert!(
                report.passed(),
                "{:?}: max rel err {}",
                branches,
                report.max_rel_err
            );
            assert_eq!(model.store.snapshot(), snap, "gradient check moved parameters");
        }
    }
}
