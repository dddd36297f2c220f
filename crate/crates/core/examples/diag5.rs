//! Scratch diagnostic: full 30-epoch trajectory on the generated corpus.

use std::time::Instant;

use codemix::corpus::{Dataset, Tweet};
use codemix::eval::evaluate;
use codemix::features::EmbeddingTable;
use codemix::neural::{
    train_neural, BranchConfig, CharVocab, NeuralTrainConfig, SsLstmConfig, SsLstmModel,
};
use codemix::preprocess::{clean_tweet, PreprocessConfig};
use codemix::synthetic::{synthetic_corpus, synthetic_embeddings};

fn clean(ds: &Dataset, cfg: &PreprocessConfig) -> Vec<Tweet> {
    ds.tweets.iter().map(|t| clean_tweet(t, cfg)).collect()
}

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(11);
    let t0 = Instant::now();
    let corpus = synthetic_corpus(seed);
    let prep = PreprocessConfig::default();
    let train = clean(&corpus.train, &prep);
    let valid = clean(&corpus.valid, &prep);
    let test = clean(&corpus.test, &prep);

    let vocab = CharVocab::from_texts(
        train.iter().flat_map(|t| t.tokens.iter().map(|tok| tok.text.as_str())),
    );
    let cfg = SsLstmConfig::new(BranchConfig::Dual, vocab);
    let table: EmbeddingTable<f64> = synthetic_embeddings(256, seed);
    let model = SsLstmModel::new(cfg, Some(&table), seed).expect("valid config");
    println!("seed {seed}: {} parameters, setup {:?}", model.n_parameters(), t0.elapsed());

    let tc = NeuralTrainConfig { seed, patience: 30, ..NeuralTrainConfig::default() };
    let t1 = Instant::now();
    let trained = train_neural(model, &train, &valid, &tc).expect("training runs");
    for (e, rec) in trained.history.iter().enumerate() {
        println!("{}", rec.log_line(e));
    }
    println!(
        "best epoch {:?} valid_macro_f1 {:.4}, train {:?}",
        trained.best_epoch,
        trained.best_valid_macro_f1,
        t1.elapsed()
    );

    let preds = trained.model.predict_batch(&test);
    let golds: Vec<_> = test.iter().map(|t| t.label.unwrap()).collect();
    let m = evaluate(&preds, &golds).expect("parallel lists");
    println!("test macro_f1 {:.4} weighted_f1 {:.4}", m.macro_f1, m.weighted_f1);
    println!("total {:?}", t0.elapsed());
}
