//! Subcommand implementations. Each one loads the merged configuration,
//! performs its work through the library crate, writes artifacts under a
//! fresh run directory and prints a short deterministic summary.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use codemix::autodiff::{parse_checkpoint, Checkpoint};
use codemix::classical::{train_classical, ClassicalModel};
use codemix::corpus::{dataset_to_string, parse_dataset, Dataset, SentimentLabel, Tweet};
use codemix::eval::{detail_report, evaluate};
use codemix::features::{
    fit_tfidf, load_embeddings, read_vocabulary, smoothed_idf, tfidf_sparse_vector,
    tweet_vector_mean, tweet_vector_tfidf_weighted, write_vocabulary, EmbeddingTable,
    FeatureVector, TfIdfModel, UnkPolicy,
};
use codemix::neural::{
    grid_search, train_neural, BranchConfig, CharVocab, SsLstmConfig, SsLstmModel,
};
use codemix::preprocess::{clean_tweet, PreprocessConfig};

use crate::args::{Cli, Command, EvalArgs, PredictArgs, PreprocessArgs, TrainArgs};
use crate::config::{create_run_dir, KindSpec, ModelSpec, Representation, RunConfig};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Grid(args) => cmd_grid(args),
    }
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let input = match &args.input {
        Some(path) => path.clone(),
        None => cfg
            .paths
            .train
            .clone()
            .context("no input file: pass --input or set paths.train")?,
    };
    let ds = read_corpus(&input, false)?;
    let before = n_tokens(&ds.tweets);
    let cleaned = clean_all(&cfg.preprocess, &ds.tweets);
    let after = n_tokens(&cleaned);

    let run_dir = create_run_dir(&cfg.paths.out_dir, cfg.seed)?;
    let out_path = run_dir.join("cleaned.txt");
    write_text(&out_path, &dataset_to_string(&Dataset::new(ds.split, cleaned)))?;
    println!("cleaned {} tweets: {} tokens -> {}", ds.tweets.len(), before, after);
    println!("wrote {}", out_path.display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let run_dir = create_run_dir(&cfg.paths.out_dir, cfg.seed)?;
    println!("run directory: {}", run_dir.display());
    match cfg.model.clone() {
        ModelSpec::Neural { branches, n_layers, fine_tune_words } => {
            train_neural_model(&cfg, &run_dir, branches, n_layers, fine_tune_words)
        }
        ModelSpec::Classical { kind, mlp_hidden, representation, unk_policy } => {
            train_classical_model(&cfg, &run_dir, kind, mlp_hidden, representation, unk_policy)
        }
    }
}

fn train_neural_model(
    cfg: &RunConfig,
    run_dir: &Path,
    branches: BranchConfig,
    n_layers: usize,
    fine_tune_words: bool,
) -> Result<()> {
    let train_raw = read_corpus(cfg.require_train()?, true)?;
    let valid_raw = match &cfg.paths.valid {
        Some(path) => read_corpus(path, true)?.tweets,
        None => Vec::new(),
    };
    let train = clean_all(&cfg.preprocess, &train_raw.tweets);
    let valid = clean_all(&cfg.preprocess, &valid_raw);

    let mut model_cfg = SsLstmConfig::new(branches, char_vocab(&train));
    model_cfg.n_layers = n_layers;
    model_cfg.fine_tune_words = fine_tune_words;
    let table = word_table(cfg, branches)?;
    let model = SsLstmModel::new(model_cfg, table.as_ref(), cfg.seed)?;
    println!(
        "training ss-lstm ({}) on {} tweets, {} parameters",
        branches.name(),
        train.len(),
        model.n_parameters()
    );

    let trained = train_neural(model, &train, &valid, &cfg.training.neural)?;
    let mut log = String::new();
    for (epoch, rec) in trained.history.iter().enumerate() {
        let line = rec.log_line(epoch);
        println!("{line}");
        log.push_str(&line);
        log.push('\n');
    }
    let summary = match trained.best_epoch {
        Some(e) => format!("best epoch {e}  valid_macro_f1 {:.4}", trained.best_valid_macro_f1),
        None => "no validation set; kept final-epoch parameters".to_string(),
    };
    println!("{summary}");
    log.push_str(&summary);
    log.push('\n');

    let ckpt_path = run_dir.join("checkpoint.txt");
    trained.model.save(&ckpt_path)?;
    write_text(&run_dir.join("metrics.log"), &log)?;
    save_config_snapshot(run_dir, cfg)?;
    println!("wrote {}", ckpt_path.display());
    Ok(())
}

fn train_classical_model(
    cfg: &RunConfig,
    run_dir: &Path,
    kind: KindSpec,
    mlp_hidden: usize,
    representation: Representation,
    unk_policy: UnkPolicy,
) -> Result<()> {
    let train_raw = read_corpus(cfg.require_train()?, true)?;
    let train = clean_all(&cfg.preprocess, &train_raw.tweets);
    let tfidf = match representation.needs_tfidf() {
        true => Some(fit_tfidf::<f64>(&train)?),
        false => None,
    };
    let table = match representation.needs_embeddings() {
        true => Some(load_table(cfg.require_embeddings()?, unk_policy)?),
        false => None,
    };
    let labels = gold_labels(&train)?;
    let feats = featurize(&train, representation, tfidf.as_ref(), table.as_ref())?;
    let data: Vec<(FeatureVector<f64>, SentimentLabel)> =
        feats.into_iter().zip(labels).collect();

    let kind = kind.to_kind(mlp_hidden);
    println!(
        "training {} on {} tweets ({} features)",
        kind.name(),
        data.len(),
        representation.name()
    );
    let out = train_classical(kind, &data, &cfg.training.classical)?;
    let mut log = String::new();
    for (epoch, rec) in out.history.iter().enumerate() {
        let line = format!(
            "epoch {:>3}  loss {:.6}  weight_norm {:.6}",
            epoch, rec.loss, rec.weight_norm
        );
        println!("{line}");
        log.push_str(&line);
        log.push('\n');
    }
    if let Some(path) = &cfg.paths.valid {
        let valid = clean_all(&cfg.preprocess, &read_corpus(path, true)?.tweets);
        if !valid.is_empty() {
            let vf = featurize(&valid, representation, tfidf.as_ref(), table.as_ref())?;
            let preds = vf
                .iter()
                .map(|f| out.model.predict(f))
                .collect::<Result<Vec<_>, _>>()?;
            let m = evaluate(&preds, &gold_labels(&valid)?)?;
            let line = format!(
                "valid  macro_f1 {:.4}  weighted_f1 {:.4}",
                m.macro_f1, m.weighted_f1
            );
            println!("{line}");
            log.push_str(&line);
            log.push('\n');
        }
    }

    let ckpt_path = run_dir.join("checkpoint.txt");
    out.model.save(&ckpt_path)?;
    if let Some(t) = &tfidf {
        let vocab_path = run_dir.join("vocabulary.txt");
        let mut file = fs::File::create(&vocab_path)
            .with_context(|| format!("creating {}", vocab_path.display()))?;
        write_vocabulary(&t.vocabulary, &mut file)
            .with_context(|| format!("writing {}", vocab_path.display()))?;
    }
    write_text(&run_dir.join("metrics.log"), &log)?;
    save_config_snapshot(run_dir, cfg)?;
    println!("wrote {}", ckpt_path.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let input = match &args.input {
        Some(path) => path.clone(),
        None => cfg
            .paths
            .test
            .clone()
            .context("no input file: pass --input or set paths.test")?,
    };
    let ds = read_corpus(&input, true)?;
    let cleaned = clean_all(&cfg.preprocess, &ds.tweets);
    let golds = gold_labels(&cleaned)?;
    let preds = predictions(&cfg, &args.checkpoint, &args.vocabulary, &cleaned)?;
    let metrics = evaluate(&preds, &golds)?;
    let report = detail_report(&metrics);
    print!("{report}");

    let run_dir = create_run_dir(&cfg.paths.out_dir, cfg.seed)?;
    let report_path = run_dir.join("metrics_report.txt");
    write_text(&report_path, &report)?;
    println!("wrote {}", report_path.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let ds = read_corpus(&args.input, false)?;
    let cleaned = clean_all(&cfg.preprocess, &ds.tweets);
    let preds = predictions(&cfg, &args.checkpoint, &args.vocabulary, &cleaned)?;
    // Predictions come from the cleaned tokens; the output keeps the
    // original surface tokens so it round-trips losslessly.
    let labeled: Vec<Tweet> = ds
        .tweets
        .iter()
        .zip(&preds)
        .map(|(t, &p)| Tweet { id: t.id.clone(), label: Some(p), tokens: t.tokens.clone() })
        .collect();
    let out_path = match &args.output {
        Some(path) => path.clone(),
        None => create_run_dir(&cfg.paths.out_dir, cfg.seed)?.join("predictions.txt"),
    };
    write_text(&out_path, &dataset_to_string(&Dataset::new(ds.split, labeled)))?;
    println!("wrote {} predictions to {}", preds.len(), out_path.display());
    Ok(())
}

fn cmd_grid(args: TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let ModelSpec::Neural { branches, fine_tune_words, .. } = cfg.model else {
        bail!("grid search trains the neural model; the config selects the classical family");
    };
    let run_dir = create_run_dir(&cfg.paths.out_dir, cfg.seed)?;
    println!("run directory: {}", run_dir.display());

    let train_raw = read_corpus(cfg.require_train()?, true)?;
    let valid_raw = match &cfg.paths.valid {
        Some(path) => read_corpus(path, true)?.tweets,
        None => Vec::new(),
    };
    let train = clean_all(&cfg.preprocess, &train_raw.tweets);
    let valid = clean_all(&cfg.preprocess, &valid_raw);
    if valid.is_empty() {
        println!("warning: no validation set; cell selection degenerates to the first cell");
    }

    let mut model_cfg = SsLstmConfig::new(branches, char_vocab(&train));
    model_cfg.fine_tune_words = fine_tune_words;
    let table = word_table(&cfg, branches)?;
    let out = grid_search(
        &model_cfg,
        table.as_ref(),
        &train,
        &valid,
        &cfg.training.neural,
        &cfg.grid,
    )?;

    let mut report = String::new();
    for (i, cell) in out.cells.iter().enumerate() {
        let mark = if i == out.best_index { '*' } else { ' ' };
        let best = cell.best_epoch.map_or_else(|| "-".to_string(), |e| e.to_string());
        report.push_str(&format!(
            "{mark} lr {:<8} layers {}  epochs {:<3} best {:<3} macro_f1 {:.4}  weighted_f1 {:.4}  seed {}\n",
            cell.lr, cell.n_layers, cell.epochs, best, cell.valid_macro_f1,
            cell.valid_weighted_f1, cell.seed
        ));
    }
    print!("{report}");

    let ckpt_path = run_dir.join("checkpoint.txt");
    out.best.model.save(&ckpt_path)?;
    write_text(&run_dir.join("grid_report.txt"), &report)?;
    save_config_snapshot(&run_dir, &cfg)?;
    println!("wrote {}", ckpt_path.display());
    Ok(())
}

/// Load a checkpoint, rebuild the matching model and label `cleaned`.
/// The checkpoint's `model` tag must agree with the configured family.
fn predictions(
    cfg: &RunConfig,
    checkpoint: &Path,
    vocabulary: &Option<PathBuf>,
    cleaned: &[Tweet],
) -> Result<Vec<SentimentLabel>> {
    let text = fs::read_to_string(checkpoint)
        .with_context(|| format!("reading checkpoint {}", checkpoint.display()))?;
    let ckpt: Checkpoint<f64> = parse_checkpoint(&text)?;
    let family = ckpt
        .meta_value("model")
        .context("checkpoint has no model tag")?
        .to_string();
    match (family.as_str(), &cfg.model) {
        ("ss-lstm", ModelSpec::Neural { .. }) => {
            let branches = ckpt
                .meta_value("branches")
                .and_then(BranchConfig::from_name)
                .context("checkpoint has a missing or unknown branches tag")?;
            let table = word_table(cfg, branches)?;
            let model = SsLstmModel::from_checkpoint(&ckpt, table.as_ref())?;
            Ok(model.predict_batch(cleaned))
        }
        ("classical", ModelSpec::Classical { kind, mlp_hidden, representation, unk_policy }) => {
            let model = ClassicalModel::from_checkpoint(&ckpt)?;
            let expected = kind.to_kind(*mlp_hidden).name();
            if model.kind().name() != expected {
                bail!(
                    "checkpoint kind {} does not match the configured kind {expected}",
                    model.kind().name()
                );
            }
            let tfidf = match representation.needs_tfidf() {
                true => {
                    let path = vocabulary
                        .clone()
                        .unwrap_or_else(|| checkpoint.with_file_name("vocabulary.txt"));
                    Some(tfidf_from_file(&path)?)
                }
                false => None,
            };
            let table = match representation.needs_embeddings() {
                true => Some(load_table(cfg.require_embeddings()?, *unk_policy)?),
                false => None,
            };
            let feats = featurize(cleaned, *representation, tfidf.as_ref(), table.as_ref())?;
            feats
                .iter()
                .map(|f| model.predict(f).map_err(Into::into))
                .collect()
        }
        (found, spec) => bail!(
            "checkpoint model {found:?} does not match the configured {} family",
            spec.family()
        ),
    }
}

fn featurize(
    tweets: &[Tweet],
    rep: Representation,
    tfidf: Option<&TfIdfModel<f64>>,
    table: Option<&EmbeddingTable<f64>>,
) -> Result<Vec<FeatureVector<f64>>> {
    tweets
        .iter()
        .map(|t| match rep {
            Representation::Tfidf => {
                Ok(tfidf_sparse_vector(t, tfidf.expect("tfidf fitted for tfidf representations")))
            }
            Representation::EmbeddingMean => {
                tweet_vector_mean(t, table.expect("embeddings loaded")).map_err(Into::into)
            }
            Representation::TfidfEmbedding => tweet_vector_tfidf_weighted(
                t,
                table.expect("embeddings loaded"),
                tfidf.expect("tfidf fitted for tfidf representations"),
            )
            .map_err(Into::into),
        })
        .collect()
}

fn read_corpus(path: &Path, expect_labels: bool) -> Result<Dataset> {
    let file =
        fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_dataset(BufReader::new(file), expect_labels)
        .with_context(|| format!("parsing {}", path.display()))
}

fn clean_all(cfg: &PreprocessConfig, tweets: &[Tweet]) -> Vec<Tweet> {
    tweets.iter().map(|t| clean_tweet(t, cfg)).collect()
}

fn n_tokens(tweets: &[Tweet]) -> usize {
    tweets.iter().map(Tweet::n_tokens).sum()
}

fn gold_labels(tweets: &[Tweet]) -> Result<Vec<SentimentLabel>> {
    tweets
        .iter()
        .map(|t| t.label.with_context(|| format!("tweet {} is unlabeled", t.id)))
        .collect()
}

fn char_vocab(train: &[Tweet]) -> CharVocab {
    CharVocab::from_texts(
        train
            .iter()
            .flat_map(|t| t.tokens.iter().map(|tok| tok.text.as_str())),
    )
}

/// Load the embedding table when `branches` has a word side; `None` otherwise.
fn word_table(cfg: &RunConfig, branches: BranchConfig) -> Result<Option<EmbeddingTable<f64>>> {
    if !branches.uses_word() {
        return Ok(None);
    }
    Ok(Some(load_table(cfg.require_embeddings()?, UnkPolicy::TrainableUnk)?))
}

fn load_table(path: &Path, policy: UnkPolicy) -> Result<EmbeddingTable<f64>> {
    let file =
        fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let table = load_embeddings(BufReader::new(file), policy)
        .with_context(|| format!("reading embeddings {}", path.display()))?;
    for warning in &table.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(table)
}

/// Rebuild the tf-idf model from a saved vocabulary; idf values follow from
/// the stored document frequencies.
fn tfidf_from_file(path: &Path) -> Result<TfIdfModel<f64>> {
    let file = fs::File::open(path).with_context(|| {
        format!(
            "opening tf-idf vocabulary {} (pass --vocabulary or keep vocabulary.txt beside the checkpoint)",
            path.display()
        )
    })?;
    let vocabulary = read_vocabulary(BufReader::new(file))
        .with_context(|| format!("reading vocabulary {}", path.display()))?;
    let idf = (0..vocabulary.len())
        .map(|i| smoothed_idf(vocabulary.n_documents(), vocabulary.df(i)))
        .collect();
    Ok(TfIdfModel { vocabulary, idf })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn save_config_snapshot(run_dir: &Path, cfg: &RunConfig) -> Result<()> {
    let mut text = serde_json::to_string_pretty(cfg).context("serializing config snapshot")?;
    text.push('\n');
    write_text(&run_dir.join("config.json"), &text)
}
