//! Vocabularies, tf-idf weighting, pretrained embedding tables, and the
//! tweet-level feature vectors consumed by the classical models.
//!
//! tf-idf uses raw term counts and the smoothed inverse document frequency
//! `idf = ln((1 + n_docs) / (1 + df)) + 1`, which is finite and positive for
//! every df <= n_docs.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tweet;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("tweet {id:?} has no tokens")]
    EmptyTweet { id: String },
    #[error("line {line}: expected {expected} vector components, got {got}")]
    InconsistentLength { line: usize, expected: usize, got: usize },
    #[error("line {line}: non-numeric field {field:?}")]
    NonNumeric { line: usize, field: String },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense token index with per-token document frequencies.
///
/// Indices are assigned in first-occurrence order, so building from the same
/// corpus always yields the same mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<usize>,
    n_documents: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }
}

/// Collect distinct token texts and document frequencies from a corpus.
/// df counts tweets containing the token, not occurrences.
pub fn build_vocabulary(corpus: &[Tweet]) -> Result<Vocabulary, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut tokens: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    for tweet in corpus {
        let mut seen: HashSet<&str> = HashSet::new();
        for token in &tweet.tokens {
            if !seen.insert(&token.text) {
                continue;
            }
            match index.get(&token.text) {
                Some(&i) => df[i] += 1,
                None => {
                    index.insert(token.text.clone(), tokens.len());
                    tokens.push(token.text.clone());
                    df.push(1);
                }
            }
        }
    }
    Ok(Vocabulary { tokens, index, df, n_documents: corpus.len() })
}

/// Vocabulary plus precomputed idf values.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel<S: Scalar> {
    pub vocabulary: Vocabulary,
    pub idf: Vec<S>,
}

pub fn smoothed_idf<S: Scalar>(n_documents: usize, df: usize) -> S {
    let ratio = (1.0 + n_documents as f64) / (1.0 + df as f64);
    S::c(ratio.ln() + 1.0)
}

pub fn fit_tfidf<S: Scalar>(corpus: &[Tweet]) -> Result<TfIdfModel<S>, FeatureError> {
    let vocabulary = build_vocabulary(corpus)?;
    let idf = (0..vocabulary.len())
        .map(|i| smoothed_idf(vocabulary.n_documents(), vocabulary.df(i)))
        .collect();
    Ok(TfIdfModel { vocabulary, idf })
}

impl<S: Scalar> TfIdfModel<S> {
    /// Weight of `token` within `tweet`: raw count times idf; 0 when the
    /// token is not in the vocabulary.
    pub fn tfidf_weight(&self, token: &str, tweet: &Tweet) -> S {
        let Some(i) = self.vocabulary.index_of(token) else {
            return S::zero();
        };
        let tf = tweet.tokens.iter().filter(|t| t.text == token).count();
        S::from_usize_c(tf) * self.idf[i]
    }
}

/// Behaviour of lookups for tokens missing from an [`EmbeddingTable`].
///
/// `TrainableUnk` is meaningful only inside the neural models, which own the
/// trainable vector; dense featurization here treats it like `Zero`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnkPolicy {
    Zero,
    MeanOfAll,
    TrainableUnk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S: Scalar> {
    dim: usize,
    vectors: HashMap<String, Vec<S>>,
    /// Token order as loaded; fixes iteration and write order.
    order: Vec<String>,
    pub unk_policy: UnkPolicy,
    /// Non-fatal anomalies observed while loading (duplicate tokens).
    pub warnings: Vec<String>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn from_pairs(
        dim: usize,
        pairs: impl IntoIterator<Item = (String, Vec<S>)>,
        unk_policy: UnkPolicy,
    ) -> Self {
        let mut table = EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            order: Vec::new(),
            unk_policy,
            warnings: Vec::new(),
        };
        for (token, vector) in pairs {
            assert_eq!(
                vector.len(),
                dim,
                "vector for {token:?} has length {}, table dim is {dim}",
                vector.len()
            );
            if table.vectors.insert(token.clone(), vector).is_none() {
                table.order.push(token);
            }
        }
        table
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn lookup(&self, token: &str) -> Option<&[S]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn tokens(&self) -> &[String] {
        &self.order
    }

    /// Componentwise mean over all stored vectors; zeros for an empty table.
    pub fn mean_vector(&self) -> Vec<S> {
        let mut mean = vec![S::zero(); self.dim];
        if self.order.is_empty() {
            return mean;
        }
        for token in &self.order {
            for (m, &v) in mean.iter_mut().zip(self.vectors[token].iter()) {
                *m += v;
            }
        }
        let n = S::from_usize_c(self.order.len());
        for m in &mut mean {
            *m /= n;
        }
        mean
    }

    /// Dense stand-in vector for out-of-vocabulary tokens.
    pub fn unk_dense(&self) -> Vec<S> {
        match self.unk_policy {
            UnkPolicy::Zero | UnkPolicy::TrainableUnk => vec![S::zero(); self.dim],
            UnkPolicy::MeanOfAll => self.mean_vector(),
        }
    }

    fn dense_or_unk(&self, token: &str, unk: &[S]) -> Vec<S> {
        match self.lookup(token) {
            Some(v) => v.to_vec(),
            None => unk.to_vec(),
        }
    }
}

/// Read word2vec text format: optional `<count> <dim>` header, then
/// `<token> v1 ... vd` lines, space-separated. Duplicate tokens keep the
/// last vector and add a warning. The declared header count is informative
/// only; the actual rows win.
pub fn load_embeddings<S: Scalar>(
    reader: impl BufRead,
    unk_policy: UnkPolicy,
) -> Result<EmbeddingTable<S>, FeatureError> {
    let mut dim: Option<usize> = None;
    let mut vectors: HashMap<String, Vec<S>> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    let mut line_no = 0usize;
    for line in reader.lines() {
        line_no += 1;
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();

        // Header heuristic: a first line of exactly two integers.
        if line_no == 1 && fields.len() == 2 {
            if let (Ok(_count), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if d == 0 {
                    return Err(FeatureError::Malformed {
                        line: line_no,
                        msg: "header declares dimension 0".to_string(),
                    });
                }
                dim = Some(d);
                continue;
            }
        }

        if fields.len() < 2 {
            return Err(FeatureError::Malformed {
                line: line_no,
                msg: format!("expected \"<token> v1 ... vd\", got {trimmed:?}"),
            });
        }
        let token = fields[0];
        let values = &fields[1..];
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            return Err(FeatureError::InconsistentLength {
                line: line_no,
                expected: d,
                got: values.len(),
            });
        }
        let mut vector = Vec::with_capacity(d);
        for field in values {
            let v: S = field.parse().map_err(|_| FeatureError::NonNumeric {
                line: line_no,
                field: field.to_string(),
            })?;
            vector.push(v);
        }
        if vectors.insert(token.to_string(), vector).is_some() {
            warnings.push(format!("line {line_no}: duplicate token {token:?}, keeping last"));
        } else {
            order.push(token.to_string());
        }
    }

    Ok(EmbeddingTable {
        dim: dim.unwrap_or(0),
        vectors,
        order,
        unk_policy,
        warnings,
    })
}

/// Write a table back in word2vec text format (with header), in load order.
pub fn write_embeddings<S: Scalar>(
    table: &EmbeddingTable<S>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "{} {}", table.len(), table.dim())?;
    for token in table.tokens() {
        write!(out, "{token}")?;
        for v in table.lookup(token).expect("order lists stored tokens") {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    TfIdfSparse,
    EmbeddingMean,
    TfIdfWeightedEmbedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<S: Scalar> {
    pub values: Vec<S>,
    pub provenance: Provenance,
}

impl<S: Scalar> FeatureVector<S> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Mean of the token embeddings: `(1/N) * sum e(token_i)`.
pub fn tweet_vector_mean<S: Scalar>(
    tweet: &Tweet,
    table: &EmbeddingTable<S>,
) -> Result<FeatureVector<S>, FeatureError> {
    if tweet.tokens.is_empty() {
        return Err(FeatureError::EmptyTweet { id: tweet.id.clone() });
    }
    let unk = table.unk_dense();
    let mut acc = vec![S::zero(); table.dim()];
    for token in &tweet.tokens {
        let e = table.dense_or_unk(&token.text, &unk);
        for (a, v) in acc.iter_mut().zip(e) {
            *a += v;
        }
    }
    let n = S::from_usize_c(tweet.n_tokens());
    for a in &mut acc {
        *a /= n;
    }
    Ok(FeatureVector { values: acc, provenance: Provenance::EmbeddingMean })
}

/// tf-idf weighted embedding average:
/// `(sum_{i=1..N} tfidf(token_i) * e(token_i)) / N`, where `tfidf(token_i)`
/// is the tweet-level weight of that token's type (so a token occurring
/// twice contributes two terms, each carrying the full tf * idf weight).
pub fn tweet_vector_tfidf_weighted<S: Scalar>(
    tweet: &Tweet,
    table: &EmbeddingTable<S>,
    model: &TfIdfModel<S>,
) -> Result<FeatureVector<S>, FeatureError> {
    if tweet.tokens.is_empty() {
        return Err(FeatureError::EmptyTweet { id: tweet.id.clone() });
    }
    let unk = table.unk_dense();
    let mut acc = vec![S::zero(); table.dim()];
    for token in &tweet.tokens {
        let w = model.tfidf_weight(&token.text, tweet);
        let e = table.dense_or_unk(&token.text, &unk);
        for (a, v) in acc.iter_mut().zip(e) {
            *a += w * v;
        }
    }
    let n = S::from_usize_c(tweet.n_tokens());
    for a in &mut acc {
        *a /= n;
    }
    Ok(FeatureVector { values: acc, provenance: Provenance::TfIdfWeightedEmbedding })
}

/// Length-V bag of tf-idf weights, L2-normalized; the zero vector (all
/// tokens out of vocabulary) stays zero.
pub fn tfidf_sparse_vector<S: Scalar>(tweet: &Tweet, model: &TfIdfModel<S>) -> FeatureVector<S> {
    let v = model.vocabulary.len();
    let mut values = vec![S::zero(); v];
    let mut seen: HashSet<&str> = HashSet::new();
    for token in &tweet.tokens {
        if !seen.insert(&token.text) {
            continue;
        }
        if let Some(i) = model.vocabulary.index_of(&token.text) {
            values[i] = model.tfidf_weight(&token.text, tweet);
        }
    }
    let norm = values.iter().fold(S::zero(), |a, &x| a + x * x).sqrt();
    if norm > S::zero() {
        for x in &mut values {
            *x /= norm;
        }
    }
    FeatureVector { values, provenance: Provenance::TfIdfSparse }
}

const VOCAB_MAGIC: &str = "codemix-vocab v1";

/// Persist a vocabulary: magic line, `docs <n>`, then `token\tindex\tdf`
/// lines in index order.
pub fn write_vocabulary(vocab: &Vocabulary, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{VOCAB_MAGIC}")?;
    writeln!(out, "docs {}", vocab.n_documents())?;
    for i in 0..vocab.len() {
        writeln!(out, "{}\t{}\t{}", vocab.token(i), i, vocab.df(i))?;
    }
    Ok(())
}

pub fn read_vocabulary(reader: impl BufRead) -> Result<Vocabulary, FeatureError> {
    let mut lines = reader.lines();
    let mut line_no = 0usize;
    let mut next = |line_no: &mut usize| -> Result<Option<String>, FeatureError> {
        *line_no += 1;
        match lines.next() {
            Some(r) => Ok(Some(r?)),
            None => Ok(None),
        }
    };

    let magic = next(&mut line_no)?.unwrap_or_default();
    if magic != VOCAB_MAGIC {
        return Err(FeatureError::Malformed {
            line: line_no,
            msg: format!("expected {VOCAB_MAGIC:?}, got {magic:?}"),
        });
    }
    let docs_line = next(&mut line_no)?.unwrap_or_default();
    let n_documents = docs_line
        .strip_prefix("docs ")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| FeatureError::Malformed {
            line: line_no,
            msg: format!("expected \"docs <n>\", got {docs_line:?}"),
        })?;

    let mut tokens = Vec::new();
    let mut index = HashMap::new();
    let mut df = Vec::new();
    while let Some(line) = next(&mut line_no)? {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |msg: String| FeatureError::Malformed { line: line_no, msg };
        if fields.len() != 3 {
            return Err(malformed(format!("expected 3 tab-separated fields, got {line:?}")));
        }
        let ix: usize = fields[1]
            .parse()
            .map_err(|_| malformed(format!("bad index {:?}", fields[1])))?;
        if ix != tokens.len() {
            return Err(malformed(format!("index {ix} out of order, expected {}", tokens.len())));
        }
        let dfv: usize = fields[2]
            .parse()
            .map_err(|_| malformed(format!("bad df {:?}", fields[2])))?;
        if dfv > n_documents {
            return Err(malformed(format!("df {dfv} exceeds document count {n_documents}")));
        }
        index.insert(fields[0].to_string(), tokens.len());
        tokens.push(fields[0].to_string());
        df.push(dfv);
    }
    if index.len() != tokens.len() {
        return Err(FeatureError::Malformed {
            line: line_no,
            msg: "duplicate token in vocabulary file".to_string(),
        });
    }
    Ok(Vocabulary { tokens, index, df, n_documents })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use crate::corpus::{LangTag, Token};

    use super::*;

    fn tweet_of(id: &str, words: &[&str]) -> Tweet {
        Tweet {
            id: id.to_string(),
            tokens: words
                .iter()
                .map(|w| Token { text: w.to_string(), lang: LangTag::Eng })
                .collect(),
            label: None,
        }
    }

    #[test]
    fn vocabulary_counts_documents() {
        let corpus = vec![tweet_of("1", &["a", "b"]), tweet_of("2", &["b", "c"])];
        let v = build_vocabulary(&corpus).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.df(v.index_of("b").unwrap()), 2);
        assert_eq!(v.df(v.index_of("a").unwrap()), 1);
        assert_eq!(v.df(v.index_of("c").unwrap()), 1);
        assert_eq!(v.n_documents(), 2);
    }

    #[test]
    fn df_counts_documents_not_occurrences() {
        let corpus = vec![tweet_of("1", &["a", "a", "a"])];
        let v = build_vocabulary(&corpus).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.df(0), 1);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(build_vocabulary(&[]), Err(FeatureError::EmptyCorpus)));
    }

    fn random_corpus(seed: u64, n: usize) -> Vec<Tweet> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let words = ["a", "b", "c", "d", "e", "f", "g", "h"];
        (0..n)
            .map(|i| {
                let k = rng.random_range(1..=6);
                let ws: Vec<&str> =
                    (0..k).map(|_| words[rng.random_range(0..words.len())]).collect();
                tweet_of(&format!("t{i}"), &ws)
            })
            .collect()
    }

    #[test]
    fn df_matches_brute_force_recount() {
        let corpus = random_corpus(17, 100);
        let v = build_vocabulary(&corpus).unwrap();
        for i in 0..v.len() {
            let token = v.token(i);
            let naive = corpus
                .iter()
                .filter(|t| t.tokens.iter().any(|tok| tok.text == token))
                .count();
            assert_eq!(v.df(i), naive, "token {token:?}");
            assert!(v.df(i) <= v.n_documents());
        }
        // Indices dense and unique.
        let mut seen = vec![false; v.len()];
        for i in 0..v.len() {
            let ix = v.index_of(v.token(i)).unwrap();
            assert!(!seen[ix]);
            seen[ix] = true;
        }
    }

    #[test]
    fn idf_hand_example() {
        // corpus ["a b", "b"]: idf(b) = ln(3/3) + 1 = 1 exactly.
        let corpus = vec![tweet_of("1", &["a", "b"]), tweet_of("2", &["b"])];
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let query = tweet_of("q", &["b"]);
        assert_eq!(m.tfidf_weight("b", &query), 1.0);
        // Unseen token.
        assert_eq!(m.tfidf_weight("zzz", &query), 0.0);
    }

    #[test]
    fn identical_docs_make_weights_proportional_to_tf() {
        let corpus = vec![
            tweet_of("1", &["x"]),
            tweet_of("2", &["x"]),
            tweet_of("3", &["x"]),
        ];
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let one = tweet_of("q1", &["x"]);
        let three = tweet_of("q3", &["x", "x", "x"]);
        let w1 = m.tfidf_weight("x", &one);
        let w3 = m.tfidf_weight("x", &three);
        assert_eq!(w3, 3.0 * w1);
    }

    #[test]
    fn idf_is_positive_finite_and_monotone_in_df() {
        for n in [1usize, 2, 10, 100] {
            let mut prev = f64::INFINITY;
            for df in 0..=n {
                let idf: f64 = smoothed_idf(n, df);
                assert!(idf.is_finite() && idf > 0.0, "n={n} df={df} idf={idf}");
                assert!(idf <= prev, "idf must not increase with df");
                prev = idf;
            }
        }
    }

    #[test]
    fn load_embeddings_with_header() {
        let table: EmbeddingTable<f64> =
            load_embeddings("2 3\na 1 0 0\nb 0 1 0\n".as_bytes(), UnkPolicy::Zero).unwrap();
        assert_eq!(table.dim(), 3);
        assert_eq!(table.len(), 2);
        assert_eq!(table.lookup("a").unwrap(), &[1.0, 0.0, 0.0]);
        assert_eq!(table.lookup("b").unwrap(), &[0.0, 1.0, 0.0]);
        assert!(table.warnings.is_empty());
    }

    #[test]
    fn load_embeddings_without_header() {
        let table: EmbeddingTable<f64> =
            load_embeddings("a 1 0\nb 0 1\n".as_bytes(), UnkPolicy::Zero).unwrap();
        assert_eq!(table.dim(), 2);
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn short_row_reports_line_number() {
        let err = load_embeddings::<f64>("2 3\na 1 0 0\nb 1 0\n".as_bytes(), UnkPolicy::Zero)
            .unwrap_err();
        match err {
            FeatureError::InconsistentLength { line, expected, got } => {
                assert_eq!((line, expected, got), (3, 3, 2));
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_reports_line() {
        let err =
            load_embeddings::<f64>("a 1 x\n".as_bytes(), UnkPolicy::Zero).unwrap_err();
        assert!(matches!(err, FeatureError::NonNumeric { line: 1, .. }));
    }

    #[test]
    fn duplicate_token_last_wins_with_warning() {
        let table: EmbeddingTable<f64> =
            load_embeddings("a 1 0\nb 0 1\na 5 5\n".as_bytes(), UnkPolicy::Zero).unwrap();
        assert_eq!(table.lookup("a").unwrap(), &[5.0, 5.0]);
        assert_eq!(table.len(), 2);
        assert_eq!(table.warnings.len(), 1);
        assert!(table.warnings[0].contains("line 3"));
    }

    #[test]
    fn thousand_row_round_trip_matches_generator() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        let dim = 7;
        let pairs: Vec<(String, Vec<f64>)> = (0..1000)
            .map(|i| {
                let v: Vec<f64> =
                    (0..dim).map(|_| (rng.random_range(-1000..1000) as f64) / 64.0).collect();
                (format!("tok{i}"), v)
            })
            .collect();
        let table = EmbeddingTable::from_pairs(dim, pairs.clone(), UnkPolicy::Zero);
        let mut buf = Vec::new();
        write_embeddings(&table, &mut buf).unwrap();
        let back: EmbeddingTable<f64> =
            load_embeddings(buf.as_slice(), UnkPolicy::Zero).unwrap();
        assert_eq!(back.dim(), dim);
        assert_eq!(back.len(), 1000);
        for (token, v) in &pairs {
            assert_eq!(back.lookup(token).unwrap(), v.as_slice(), "token {token}");
        }
    }

    fn small_table(policy: UnkPolicy) -> EmbeddingTable<f64> {
        EmbeddingTable::from_pairs(
            2,
            vec![
                ("p".to_string(), vec![1.0, 0.0]),
                ("q".to_string(), vec![0.0, 1.0]),
                ("r".to_string(), vec![2.0, 2.0]),
            ],
            policy,
        )
    }

    #[test]
    fn mean_vector_examples() {
        let table = small_table(UnkPolicy::Zero);
        let same = EmbeddingTable::from_pairs(
            2,
            vec![("x".to_string(), vec![3.0, -1.0]), ("y".to_string(), vec![3.0, -1.0])],
            UnkPolicy::Zero,
        );
        let t = tweet_of("t", &["x", "y", "x"]);
        let fv = tweet_vector_mean(&t, &same).unwrap();
        assert_eq!(fv.values, vec![3.0, -1.0]);

        let t = tweet_of("t", &["p", "q"]);
        let fv = tweet_vector_mean(&t, &table).unwrap();
        assert_eq!(fv.values, vec![0.5, 0.5]);
        assert_eq!(fv.provenance, Provenance::EmbeddingMean);
    }

    #[test]
    fn mean_oov_honors_unk_policy() {
        let t = tweet_of("t", &["p", "missing"]);
        let zero = tweet_vector_mean(&t, &small_table(UnkPolicy::Zero)).unwrap();
        assert_eq!(zero.values, vec![0.5, 0.0]);
        let mean = tweet_vector_mean(&t, &small_table(UnkPolicy::MeanOfAll)).unwrap();
        // Table mean is (1,1); so ((1,0) + (1,1)) / 2 = (1, 0.5).
        assert_eq!(mean.values, vec![1.0, 0.5]);
    }

    #[test]
    fn mean_matches_naive_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let table = small_table(UnkPolicy::Zero);
        let words = ["p", "q", "r", "zzz"];
        for trial in 0..50 {
            let k = rng.random_range(1..=7);
            let ws: Vec<&str> = (0..k).map(|_| words[rng.random_range(0..4)]).collect();
            let t = tweet_of(&format!("t{trial}"), &ws);
            let fv = tweet_vector_mean(&t, &table).unwrap();
            let mut naive = vec![0.0f64; 2];
            for w in &ws {
                if let Some(v) = table.lookup(w) {
                    naive[0] += v[0];
                    naive[1] += v[1];
                }
            }
            naive[0] /= k as f64;
            naive[1] /= k as f64;
            assert_eq!(fv.values, naive, "trial {trial}");
        }
    }

    #[test]
    fn weighted_single_token_collapses_to_w_times_v() {
        let corpus = vec![tweet_of("1", &["p", "q"]), tweet_of("2", &["q"])];
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let table = small_table(UnkPolicy::Zero);
        let t = tweet_of("t", &["p"]);
        let w = m.tfidf_weight("p", &t);
        let fv = tweet_vector_tfidf_weighted(&t, &table, &m).unwrap();
        assert_eq!(fv.values, vec![w * 1.0, w * 0.0]);
        assert_eq!(fv.provenance, Provenance::TfIdfWeightedEmbedding);
    }

    #[test]
    fn weighted_all_oov_is_zero() {
        let corpus = vec![tweet_of("1", &["p"])];
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let table = small_table(UnkPolicy::Zero);
        let t = tweet_of("t", &["nope", "also-nope"]);
        let fv = tweet_vector_tfidf_weighted(&t, &table, &m).unwrap();
        assert_eq!(fv.values, vec![0.0, 0.0]);
    }

    #[test]
    fn weighted_matches_two_pass_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let corpus = random_corpus(31, 40);
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let table = EmbeddingTable::from_pairs(
            2,
            ["a", "b", "c", "d"].iter().map(|w| {
                (w.to_string(), vec![rng.random_range(-8..8) as f64, rng.random_range(-8..8) as f64])
            }),
            UnkPolicy::Zero,
        );
        let words = ["a", "b", "c", "d", "e"];
        for trial in 0..50 {
            let k = rng.random_range(1..=6);
            let ws: Vec<&str> = (0..k).map(|_| words[rng.random_range(0..5)]).collect();
            let t = tweet_of(&format!("t{trial}"), &ws);
            let fv = tweet_vector_tfidf_weighted(&t, &table, &m).unwrap();

            // Oracle: first collect per-token weights, then accumulate.
            let weights: Vec<f64> = ws.iter().map(|w| m.tfidf_weight(w, &t)).collect();
            let mut naive = vec![0.0f64; 2];
            for (w, token) in weights.iter().zip(ws.iter()) {
                let e = table.lookup(token).map(|v| v.to_vec()).unwrap_or(vec![0.0, 0.0]);
                naive[0] += w * e[0];
                naive[1] += w * e[1];
            }
            naive[0] /= k as f64;
            naive[1] /= k as f64;
            assert_eq!(fv.values, naive, "trial {trial}");
        }
    }

    #[test]
    fn unit_weights_reduce_weighted_to_mean_exactly() {
        // Every token in every doc: df = n, so idf = ln((1+n)/(1+n)) + 1 = 1
        // exactly, and distinct query tokens have tf = 1.
        let corpus = vec![
            tweet_of("1", &["p", "q", "r"]),
            tweet_of("2", &["p", "q", "r"]),
        ];
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let table = small_table(UnkPolicy::Zero);
        let t = tweet_of("t", &["p", "q", "r"]);
        let weighted = tweet_vector_tfidf_weighted(&t, &table, &m).unwrap();
        let mean = tweet_vector_mean(&t, &table).unwrap();
        assert_eq!(weighted.values, mean.values);
    }

    #[test]
    fn tweet_vectors_are_linear_in_the_table() {
        // c = 2 is an exact scaling in binary floating point.
        let corpus = random_corpus(3, 10);
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let table = small_table(UnkPolicy::Zero);
        let doubled = EmbeddingTable::from_pairs(
            2,
            table
                .tokens()
                .iter()
                .map(|t| (t.clone(), table.lookup(t).unwrap().iter().map(|v| 2.0 * v).collect())),
            UnkPolicy::Zero,
        );
        let t = tweet_of("t", &["p", "q", "r", "p"]);
        let m1 = tweet_vector_mean(&t, &table).unwrap();
        let m2 = tweet_vector_mean(&t, &doubled).unwrap();
        assert_eq!(m2.values, m1.values.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        let w1 = tweet_vector_tfidf_weighted(&t, &table, &m).unwrap();
        let w2 = tweet_vector_tfidf_weighted(&t, &doubled, &m).unwrap();
        assert_eq!(w2.values, w1.values.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
    }

    #[test]
    fn sparse_one_hot_normalizes_to_unit_length() {
        let corpus = vec![tweet_of("1", &["p", "q"]), tweet_of("2", &["q"])];
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let t = tweet_of("t", &["p"]);
        let fv = tfidf_sparse_vector(&t, &m);
        assert_eq!(fv.len(), 2);
        let norm: f64 = fv.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let p_ix = m.vocabulary.index_of("p").unwrap();
        assert_eq!(fv.values[p_ix], 1.0);
        assert_eq!(fv.provenance, Provenance::TfIdfSparse);
    }

    #[test]
    fn sparse_all_oov_stays_zero() {
        let corpus = vec![tweet_of("1", &["p"])];
        let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
        let fv = tfidf_sparse_vector(&tweet_of("t", &["zzz"]), &m);
        assert!(fv.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vocabulary_file_round_trips() {
        let corpus = random_corpus(77, 25);
        let v = build_vocabulary(&corpus).unwrap();
        let mut buf = Vec::new();
        write_vocabulary(&v, &mut buf).unwrap();
        let back = read_vocabulary(buf.as_slice()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn vocabulary_file_rejects_garbage() {
        assert!(read_vocabulary("nope".as_bytes()).is_err());
        assert!(read_vocabulary("codemix-vocab v1\ndocs x\n".as_bytes()).is_err());
        let bad_order = "codemix-vocab v1\ndocs 2\na\t1\t1\n";
        assert!(read_vocabulary(bad_order.as_bytes()).is_err());
        let bad_df = "codemix-vocab v1\ndocs 2\na\t0\t5\n";
        assert!(read_vocabulary(bad_df.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn sparse_norm_is_zero_or_one(
            words in prop::collection::vec(prop::sample::select(vec!["a","b","c","x","y"]), 1..10)
        ) {
            let corpus = vec![tweet_of("1", &["a", "b"]), tweet_of("2", &["b", "c"])];
            let m: TfIdfModel<f64> = fit_tfidf(&corpus).unwrap();
            let ws: Vec<&str> = words.to_vec();
            let fv = tfidf_sparse_vector(&tweet_of("t", &ws), &m);
            let norm: f64 = fv.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-9, "norm {norm}");
            prop_assert!(fv.all_finite());
        }
    }
}
