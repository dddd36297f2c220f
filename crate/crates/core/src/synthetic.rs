//! Deterministic generator for a separable code-mixed sentiment corpus.
//!
//! End-to-end tests and demos need labeled data whose classes are learnable
//! by construction: each tweet carries sentiment-bearing lexicon tokens for
//! its class, a configurable share of examples express the class through a
//! negated token of the opposite polarity, and lexicon tokens are randomly
//! distorted (elongated or misspelled) so the character branch has real work
//! to do and the word branch sees out-of-vocabulary forms. Everything is a
//! pure function of the seed.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, LangTag, SentimentLabel, Split, Token, Tweet};
use crate::features::{EmbeddingTable, UnkPolicy};
use crate::scalar::Scalar;

pub const SYNTHETIC_TRAIN: usize = 600;
pub const SYNTHETIC_VALID: usize = 150;
pub const SYNTHETIC_TEST: usize = 150;

/// Share of examples per class built from a negated opposite-polarity token.
pub const NEGATION_SHARE: f64 = 0.30;

/// Distortion probability per lexicon token occurrence.
const DISTORT_PROB: f64 = 0.30;

const POSITIVE_WORDS: &[(&str, LangTag)] = &[
    ("accha", LangTag::Hin),
    ("badhiya", LangTag::Hin),
    ("mast", LangTag::Hin),
    ("zabardast", LangTag::Hin),
    ("khushi", LangTag::Hin),
    ("love", LangTag::Eng),
    ("great", LangTag::Eng),
    ("awesome", LangTag::Eng),
    ("happy", LangTag::Eng),
    ("best", LangTag::Eng),
];

const NEGATIVE_WORDS: &[(&str, LangTag)] = &[
    ("bura", LangTag::Hin),
    ("bekar", LangTag::Hin),
    ("ganda", LangTag::Hin),
    ("kharab", LangTag::Hin),
    ("dukh", LangTag::Hin),
    ("hate", LangTag::Eng),
    ("terrible", LangTag::Eng),
    ("awful", LangTag::Eng),
    ("sad", LangTag::Eng),
    ("worst", LangTag::Eng),
];

const NEUTRAL_WORDS: &[(&str, LangTag)] = &[
    ("theek", LangTag::Hin),
    ("aam", LangTag::Hin),
    ("samanya", LangTag::Hin),
    ("waisa", LangTag::Hin),
    ("thik", LangTag::Hin),
    ("okay", LangTag::Eng),
    ("normal", LangTag::Eng),
    ("plain", LangTag::Eng),
    ("average", LangTag::Eng),
    ("usual", LangTag::Eng),
];

const FILLERS: &[(&str, LangTag)] = &[
    ("yaar", LangTag::Hin),
    ("bhai", LangTag::Hin),
    ("gaana", LangTag::Hin),
    ("din", LangTag::Hin),
    ("aaj", LangTag::Hin),
    ("kal", LangTag::Hin),
    ("bahut", LangTag::Hin),
    ("thoda", LangTag::Hin),
    ("phir", LangTag::Hin),
    ("abhi", LangTag::Hin),
    ("log", LangTag::Hin),
    ("baat", LangTag::Hin),
    ("movie", LangTag::Eng),
    ("film", LangTag::Eng),
    ("song", LangTag::Eng),
    ("time", LangTag::Eng),
    ("scene", LangTag::Eng),
    ("story", LangTag::Eng),
    ("actor", LangTag::Eng),
    ("weekend", LangTag::Eng),
];

const NEGATORS: &[(&str, LangTag)] = &[
    ("not", LangTag::Eng),
    ("never", LangTag::Eng),
    ("nahi", LangTag::Hin),
    ("mat", LangTag::Hin),
];

fn class_words(label: SentimentLabel) -> &'static [(&'static str, LangTag)] {
    match label {
        SentimentLabel::Positive => POSITIVE_WORDS,
        SentimentLabel::Negative => NEGATIVE_WORDS,
        SentimentLabel::Neutral => NEUTRAL_WORDS,
    }
}

/// Polarity source for a negation example: negating the opposite class
/// expresses positive/negative; neutral stays neutral under negation.
fn negation_source(label: SentimentLabel) -> SentimentLabel {
    match label {
        SentimentLabel::Positive => SentimentLabel::Negative,
        SentimentLabel::Negative => SentimentLabel::Positive,
        SentimentLabel::Neutral => SentimentLabel::Neutral,
    }
}

/// Repeat one character of `text` so it forms a run of length 3 to 6. After
/// elongation normalization (runs truncated to 2) the token still differs
/// from the base form unless the base already doubled that character.
fn elongate(text: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = text.chars().collect();
    let pos = rng.random_range(0..chars.len());
    let extra = rng.random_range(2..=5);
    let mut out = String::new();
    for (i, &c) in chars.iter().enumerate() {
        out.push(c);
        if i == pos {
            for _ in 0..extra {
                out.push(c);
            }
        }
    }
    out
}

/// Swap two adjacent characters; single-character tokens come back doubled
/// so a distortion always changes the surface form.
fn misspell(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    if chars.len() < 2 {
        return format!("{text}{text}");
    }
    let pos = rng.random_range(0..chars.len() - 1);
    if chars[pos] == chars[pos + 1] {
        // Swapping equal characters would be a no-op; drop one instead.
        chars.remove(pos);
    } else {
        chars.swap(pos, pos + 1);
    }
    chars.into_iter().collect()
}

fn maybe_distort(text: &str, rng: &mut ChaCha8Rng) -> String {
    if !rng.random_bool(DISTORT_PROB) {
        return text.to_string();
    }
    if rng.random_bool(0.5) {
        elongate(text, rng)
    } else {
        misspell(text, rng)
    }
}

fn pick(words: &'static [(&'static str, LangTag)], rng: &mut ChaCha8Rng) -> (&'static str, LangTag) {
    *words.choose(rng).expect("static word lists are non-empty")
}

fn token(text: String, lang: LangTag) -> Token {
    Token::new(text, lang).expect("generator emits whitespace-free tokens")
}

fn make_tweet(
    id: String,
    label: SentimentLabel,
    negated: bool,
    rng: &mut ChaCha8Rng,
) -> Tweet {
    // Sentiment-bearing units: either [negator, opposite-class word] or two
    // same-class words. Units stay contiguous; fillers surround them.
    let mut units: Vec<Vec<Token>> = Vec::new();
    if negated {
        let (neg, neg_lang) = pick(NEGATORS, rng);
        let (w, lang) = pick(class_words(negation_source(label)), rng);
        units.push(vec![
            token(neg.to_string(), neg_lang),
            token(maybe_distort(w, rng), lang),
        ]);
    } else {
        for _ in 0..2 {
            let (w, lang) = pick(class_words(label), rng);
            units.push(vec![token(maybe_distort(w, rng), lang)]);
        }
    }
    let n_fillers = rng.random_range(2..=4);
    for _ in 0..n_fillers {
        let (f, lang) = pick(FILLERS, rng);
        units.push(vec![token(f.to_string(), lang)]);
    }
    units.shuffle(rng);
    let tokens: Vec<Token> = units.into_iter().flatten().collect();
    Tweet { id, label: Some(label), tokens }
}

fn make_split(split: Split, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
    assert!(n % 3 == 0, "split size {n} must divide evenly across 3 classes");
    let per_class = n / 3;
    let n_negated = (per_class as f64 * NEGATION_SHARE).round() as usize;
    let mut tweets = Vec::with_capacity(n);
    let mut i = 0usize;
    for label in SentimentLabel::ALL {
        for k in 0..per_class {
            let id = format!("syn-{split}-{i:04}");
            tweets.push(make_tweet(id, label, k < n_negated, rng));
            i += 1;
        }
    }
    tweets.shuffle(rng);
    Dataset::new(split, tweets)
}

pub struct SyntheticCorpus {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

/// Standard-size corpus: 600 train / 150 valid / 150 test, balanced.
pub fn synthetic_corpus(seed: u64) -> SyntheticCorpus {
    synthetic_corpus_sized(seed, SYNTHETIC_TRAIN, SYNTHETIC_VALID, SYNTHETIC_TEST)
}

pub fn synthetic_corpus_sized(
    seed: u64,
    n_train: usize,
    n_valid: usize,
    n_test: usize,
) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SyntheticCorpus {
        train: make_split(Split::Train, n_train, &mut rng),
        valid: make_split(Split::Valid, n_valid, &mut rng),
        test: make_split(Split::Test, n_test, &mut rng),
    }
}

/// Every undistorted token the generator can emit, sorted and deduplicated.
pub fn base_vocabulary() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = POSITIVE_WORDS
        .iter()
        .chain(NEGATIVE_WORDS)
        .chain(NEUTRAL_WORDS)
        .chain(FILLERS)
        .chain(NEGATORS)
        .map(|&(w, _)| w)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Class-clustered embedding table over [`base_vocabulary`]. Tokens of each
/// sentiment class share a distinct active block of 8 dimensions; fillers and
/// negators get only noise. Distorted tokens are intentionally absent so
/// lookups exercise the out-of-vocabulary path.
pub fn synthetic_embeddings<S: Scalar>(dim: usize, seed: u64) -> EmbeddingTable<S> {
    assert!(dim >= 24, "class blocks need at least 24 dimensions, got {dim}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = |label: SentimentLabel| 8 * label.index();
    let class_of = |tok: &str| {
        SentimentLabel::ALL
            .into_iter()
            .find(|&l| class_words(l).iter().any(|&(w, _)| w == tok))
    };
    let pairs: Vec<(String, Vec<S>)> = base_vocabulary()
        .into_iter()
        .map(|tok| {
            let mut v: Vec<S> = (0..dim)
                .map(|_| S::c(rng.random_range(-0.1..0.1)))
                .collect();
            if let Some(label) = class_of(tok) {
                let b = block(label);
                for x in &mut v[b..b + 8] {
                    *x += S::c(1.0);
                }
            }
            (tok.to_string(), v)
        })
        .collect();
    EmbeddingTable::from_pairs(dim, pairs, UnkPolicy::TrainableUnk)
}
