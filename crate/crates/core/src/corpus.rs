//! Token-per-line language-tagged tweet corpus: types, parser, writer.
//!
//! File grammar: records separated by one or more blank lines. A record is a
//! header line `meta <id> <label>` (label optional for unlabeled test data)
//! followed by one `<token>\t<tag>` line per token. UTF-8, LF endings;
//! trailing `\r` is tolerated on input, never produced on output.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Language identification tag attached to every token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LangTag {
    Hin,
    Eng,
    Other,
}

impl LangTag {
    /// Surface form used in corpus files ("Hin", "Eng", "O").
    pub fn surface(self) -> &'static str {
        match self {
            LangTag::Hin => "Hin",
            LangTag::Eng => "Eng",
            LangTag::Other => "O",
        }
    }
}

impl FromStr for LangTag {
    type Err = ();

    /// Accepts exactly the three surface tags, case-sensitively.
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "Hin" => Ok(LangTag::Hin),
            "Eng" => Ok(LangTag::Eng),
            "O" => Ok(LangTag::Other),
            _ => Err(()),
        }
    }
}

impl fmt::Display for LangTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

/// Three-way sentiment label. The discriminants fix the class-index order
/// used by every classifier head in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive = 0,
    Negative = 1,
    Neutral = 2,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [
        SentimentLabel::Positive,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
    ];

    pub fn surface(self) -> &'static str {
        match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<SentimentLabel> {
        Self::ALL.get(i).copied()
    }
}

impl FromStr for SentimentLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "positive" => Ok(SentimentLabel::Positive),
            "negative" => Ok(SentimentLabel::Negative),
            "neutral" => Ok(SentimentLabel::Neutral),
            _ => Err(()),
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

/// One surface token with its language tag.
///
/// Invariant: `text` is non-empty and contains no whitespace. The parser and
/// [`Token::new`] enforce it; code constructing tokens directly must uphold it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub lang: LangTag,
}

impl Token {
    pub fn new(text: impl Into<String>, lang: LangTag) -> Option<Token> {
        let text = text.into();
        if valid_token_text(&text) {
            Some(Token { text, lang })
        } else {
            None
        }
    }
}

pub fn valid_token_text(text: &str) -> bool {
    !text.is_empty() && !text.chars().any(char::is_whitespace)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub tokens: Vec<Token>,
    pub label: Option<SentimentLabel>,
}

impl Tweet {
    /// Token count N; the parser guarantees N >= 1.
    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
    Other,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
            Split::Other => "other",
        };
        f.write_str(s)
    }
}

impl FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            "other" => Ok(Split::Other),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub split: Split,
    pub tweets: Vec<Tweet>,
}

impl Dataset {
    pub fn new(split: Split, tweets: Vec<Tweet>) -> Dataset {
        Dataset { split, tweets }
    }

    pub fn with_split(mut self, split: Split) -> Dataset {
        self.split = split;
        self
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed header (expected \"meta <id> [label]\"): {text:?}")]
    MalformedHeader { line: usize, text: String },
    #[error("line {line}: unknown language tag {tag:?} (expected Hin, Eng, or O)")]
    UnknownLangTag { line: usize, tag: String },
    #[error("line {line}: unknown sentiment label {label:?} (expected positive, negative, or neutral)")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: malformed token line (expected \"<token>\\t<tag>\"): {text:?}")]
    MalformedTokenLine { line: usize, text: String },
    #[error("line {line}: token text must be non-empty without whitespace: {text:?}")]
    InvalidToken { line: usize, text: String },
    #[error("line {line}: tweet {id:?} has no tokens")]
    EmptyTweet { line: usize, id: String },
    #[error("line {line}: duplicate tweet id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: tweet {id:?} is missing a sentiment label")]
    MissingLabel { line: usize, id: String },
    #[error("tweet {id:?} is unlabeled")]
    Unlabeled { id: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Parse a corpus stream. With `expect_labels`, a header without a label is
/// an error; without it, labels are still attached when present. The result
/// has split [`Split::Other`]; callers pick the real split via
/// [`Dataset::with_split`].
pub fn parse_dataset(reader: impl BufRead, expect_labels: bool) -> Result<Dataset, CorpusError> {
    let mut tweets: Vec<Tweet> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();

    // Current record, if a header has been read.
    let mut current: Option<(usize, Tweet)> = None;

    let mut line_no = 0usize;
    for line in reader.lines() {
        line_no += 1;
        let mut line = line?;
        if line.ends_with('\r') {
            line.pop();
        }

        if line.trim().is_empty() {
            if let Some((header_line, tweet)) = current.take() {
                finish_record(header_line, tweet, &mut tweets)?;
            }
            continue;
        }

        match &mut current {
            None => {
                let tweet = parse_header(line_no, &line, expect_labels, &mut seen)?;
                current = Some((line_no, tweet));
            }
            Some((_, tweet)) => {
                let token = parse_token_line(line_no, &line)?;
                tweet.tokens.push(token);
            }
        }
    }
    if let Some((header_line, tweet)) = current.take() {
        finish_record(header_line, tweet, &mut tweets)?;
    }

    Ok(Dataset::new(Split::Other, tweets))
}

fn parse_header(
    line_no: usize,
    line: &str,
    expect_labels: bool,
    seen: &mut HashSet<String>,
) -> Result<Tweet, CorpusError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 || fields.len() > 3 || fields[0] != "meta" {
        return Err(CorpusError::MalformedHeader { line: line_no, text: line.to_string() });
    }
    let id = fields[1].to_string();
    if !seen.insert(id.clone()) {
        return Err(CorpusError::DuplicateId { line: line_no, id });
    }
    let label = match fields.get(2) {
        Some(&raw) => Some(raw.parse::<SentimentLabel>().map_err(|()| {
            CorpusError::UnknownLabel { line: line_no, label: raw.to_string() }
        })?),
        None => {
            if expect_labels {
                return Err(CorpusError::MissingLabel { line: line_no, id });
            }
            None
        }
    };
    Ok(Tweet { id, tokens: Vec::new(), label })
}

fn parse_token_line(line_no: usize, line: &str) -> Result<Token, CorpusError> {
    let Some((text, tag)) = line.rsplit_once('\t') else {
        return Err(CorpusError::MalformedTokenLine { line: line_no, text: line.to_string() });
    };
    let lang = tag.parse::<LangTag>().map_err(|()| CorpusError::UnknownLangTag {
        line: line_no,
        tag: tag.to_string(),
    })?;
    if !valid_token_text(text) {
        return Err(CorpusError::InvalidToken { line: line_no, text: text.to_string() });
    }
    Ok(Token { text: text.to_string(), lang })
}

fn finish_record(
    header_line: usize,
    tweet: Tweet,
    tweets: &mut Vec<Tweet>,
) -> Result<(), CorpusError> {
    if tweet.tokens.is_empty() {
        return Err(CorpusError::EmptyTweet { line: header_line, id: tweet.id });
    }
    tweets.push(tweet);
    Ok(())
}

/// Write the canonical form: every record ends with its blank separator, so
/// concatenating files stays valid. `parse(write(d))` equals `d` up to split.
pub fn write_dataset(dataset: &Dataset, out: &mut impl Write) -> std::io::Result<()> {
    for tweet in &dataset.tweets {
        debug_assert!(!tweet.tokens.is_empty(), "tweet {} has no tokens", tweet.id);
        match tweet.label {
            Some(label) => writeln!(out, "meta {} {}", tweet.id, label)?,
            None => writeln!(out, "meta {}", tweet.id)?,
        }
        for token in &tweet.tokens {
            debug_assert!(valid_token_text(&token.text), "invalid token {:?}", token.text);
            writeln!(out, "{}\t{}", token.text, token.lang)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn dataset_to_string(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf).expect("write to Vec cannot fail");
    String::from_utf8(buf).expect("canonical form is UTF-8")
}

/// Per-label tweet counts; all three labels appear even when zero.
pub fn class_distribution(
    dataset: &Dataset,
) -> Result<BTreeMap<SentimentLabel, usize>, CorpusError> {
    let mut counts: BTreeMap<SentimentLabel, usize> =
        SentimentLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for tweet in &dataset.tweets {
        let label = tweet
            .label
            .ok_or_else(|| CorpusError::Unlabeled { id: tweet.id.clone() })?;
        *counts.get_mut(&label).expect("all labels pre-seeded") += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn parse_str(text: &str, expect_labels: bool) -> Result<Dataset, CorpusError> {
        parse_dataset(text.as_bytes(), expect_labels)
    }

    #[test]
    fn minimal_record_parses() {
        let d = parse_str("meta 1 positive\nAll\tEng\nthe\tEng\n", true).unwrap();
        assert_eq!(d.len(), 1);
        let t = &d.tweets[0];
        assert_eq!(t.id, "1");
        assert_eq!(t.label, Some(SentimentLabel::Positive));
        assert_eq!(t.n_tokens(), 2);
        assert_eq!(t.tokens[0], Token { text: "All".into(), lang: LangTag::Eng });
    }

    #[test]
    fn example_sentence_tags_in_order() {
        let text = "meta ex1 positive\n\
                    Congratulations\tEng\nSir\tEng\nJi\tHin\nDobara\tHin\nPM\tEng\n\
                    banee\tHin\nki\tHin\nhardik\tHin\nsubhkamnaye\tHin\n.\tO\n";
        let d = parse_str(text, true).unwrap();
        let t = &d.tweets[0];
        assert_eq!(t.n_tokens(), 10);
        use LangTag::{Eng, Hin, Other};
        let tags: Vec<LangTag> = t.tokens.iter().map(|tok| tok.lang).collect();
        assert_eq!(tags, vec![Eng, Eng, Hin, Hin, Eng, Hin, Hin, Hin, Hin, Other]);
        assert_eq!(t.tokens[8].text, "subhkamnaye");
    }

    #[test]
    fn unknown_tag_names_line_and_tag() {
        let err = parse_str("meta 1 positive\nbonjour\tFra\n", true).unwrap_err();
        match &err {
            CorpusError::UnknownLangTag { line, tag } => {
                assert_eq!(*line, 2);
                assert_eq!(tag, "Fra");
            }
            other => panic!("wrong error: {other:?}"),
        }
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("Fra"), "{msg}");
    }

    #[test]
    fn unknown_label_rejected() {
        let err = parse_str("meta 1 happy\nok\tEng\n", true).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownLabel { line: 1, .. }));
    }

    #[test]
    fn missing_label_only_when_expected() {
        let err = parse_str("meta 1\nok\tEng\n", true).unwrap_err();
        assert!(matches!(err, CorpusError::MissingLabel { line: 1, .. }));

        let d = parse_str("meta 1\nok\tEng\n", false).unwrap();
        assert_eq!(d.tweets[0].label, None);

        // Labels are still attached when present.
        let d = parse_str("meta 1 neutral\nok\tEng\n", false).unwrap();
        assert_eq!(d.tweets[0].label, Some(SentimentLabel::Neutral));
    }

    #[test]
    fn empty_body_duplicate_id_malformed_header() {
        let err = parse_str("meta 1 positive\n\nmeta 2 negative\nok\tEng\n", true).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyTweet { line: 1, .. }));

        let err = parse_str(
            "meta 1 positive\nok\tEng\n\nmeta 1 negative\nno\tEng\n",
            true,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 4, .. }));

        let err = parse_str("metadata 1 positive\nok\tEng\n", true).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedHeader { line: 1, .. }));

        let err = parse_str("meta 1 positive extra\nok\tEng\n", true).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedHeader { line: 1, .. }));
    }

    #[test]
    fn token_line_without_tab_rejected() {
        let err = parse_str("meta 1 positive\nok Eng\n", true).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedTokenLine { line: 2, .. }));
    }

    #[test]
    fn token_with_inner_space_rejected() {
        let err = parse_str("meta 1 positive\na b\tEng\n", true).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidToken { line: 2, .. }));
    }

    #[test]
    fn blank_line_handling_is_tolerant() {
        let text = "\n\nmeta 1 positive\nok\tEng\n\n\n\nmeta 2 negative\nno\tEng\n\n\n";
        let d = parse_str(text, true).unwrap();
        assert_eq!(d.len(), 2);

        // Missing trailing newline after the last token line is also fine.
        let d = parse_str("meta 1 positive\nok\tEng", true).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn crlf_tolerated() {
        let d = parse_str("meta 1 positive\r\nok\tEng\r\n", true).unwrap();
        assert_eq!(d.tweets[0].tokens[0].text, "ok");
    }

    #[test]
    fn empty_dataset_writes_empty_stream() {
        let d = Dataset::new(Split::Train, vec![]);
        assert_eq!(dataset_to_string(&d), "");
    }

    #[test]
    fn single_tweet_round_trips() {
        let d = Dataset::new(
            Split::Other,
            vec![Tweet {
                id: "42".into(),
                tokens: vec![
                    Token { text: "acha".into(), lang: LangTag::Hin },
                    Token { text: "movie".into(), lang: LangTag::Eng },
                ],
                label: Some(SentimentLabel::Positive),
            }],
        );
        let text = dataset_to_string(&d);
        assert_eq!(text, "meta 42 positive\nacha\tHin\nmovie\tEng\n\n");
        let back = parse_str(&text, true).unwrap();
        assert_eq!(back.tweets, d.tweets);
    }

    fn random_dataset(seed: u64, n: usize, labeled: bool) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let words = ["acha", "nahi", "movie", "दिल", "khush", "<user>", "#tag", "🙂", "x9"];
        let tweets = (0..n)
            .map(|i| {
                let n_tok = rng.random_range(1..=8);
                let tokens = (0..n_tok)
                    .map(|_| Token {
                        text: words[rng.random_range(0..words.len())].to_string(),
                        lang: match rng.random_range(0..3) {
                            0 => LangTag::Hin,
                            1 => LangTag::Eng,
                            _ => LangTag::Other,
                        },
                    })
                    .collect();
                let label = if labeled || rng.random_bool(0.5) {
                    SentimentLabel::from_index(rng.random_range(0..3))
                } else {
                    None
                };
                Tweet { id: format!("t{i}"), tokens, label }
            })
            .collect();
        Dataset::new(Split::Other, tweets)
    }

    #[test]
    fn fifty_random_tweets_round_trip_field_by_field() {
        let d = random_dataset(99, 50, true);
        let back = parse_str(&dataset_to_string(&d), true).unwrap();
        assert_eq!(back.len(), d.len());
        for (a, b) in back.tweets.iter().zip(d.tweets.iter()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.label, b.label);
            assert_eq!(a.tokens, b.tokens);
        }
    }

    #[test]
    fn class_distribution_counts_and_rejects_unlabeled() {
        let mut d = random_dataset(7, 3, true);
        for t in &mut d.tweets {
            t.label = Some(SentimentLabel::Positive);
        }
        let counts = class_distribution(&d).unwrap();
        assert_eq!(counts[&SentimentLabel::Positive], 3);
        assert_eq!(counts[&SentimentLabel::Negative], 0);
        assert_eq!(counts[&SentimentLabel::Neutral], 0);

        d.tweets[1].label = None;
        assert!(matches!(
            class_distribution(&d),
            Err(CorpusError::Unlabeled { .. })
        ));
    }

    #[test]
    fn class_distribution_matches_brute_force_recount() {
        let d = random_dataset(123, 100, true);
        let counts = class_distribution(&d).unwrap();
        for &label in &SentimentLabel::ALL {
            let naive = d.tweets.iter().filter(|t| t.label == Some(label)).count();
            assert_eq!(counts[&label], naive, "label {label}");
        }
        assert_eq!(counts.values().sum::<usize>(), d.len());
    }

    #[test]
    fn label_surface_round_trips() {
        for &l in &SentimentLabel::ALL {
            assert_eq!(l.surface().parse::<SentimentLabel>().unwrap(), l);
            assert_eq!(SentimentLabel::from_index(l.index()), Some(l));
        }
        assert!("Positive".parse::<SentimentLabel>().is_err());
        assert!("hin".parse::<LangTag>().is_err());
        assert!("o".parse::<LangTag>().is_err());
    }

    prop_compose! {
        fn arb_token()(
            text in proptest::string::string_regex("[a-z0-9#@!.…🙂दिल]{1,10}").unwrap(),
            lang in prop::sample::select(vec![LangTag::Hin, LangTag::Eng, LangTag::Other]),
        ) -> Token {
            Token { text, lang }
        }
    }

    prop_compose! {
        fn arb_tweet(ix: usize)(
            tokens in prop::collection::vec(arb_token(), 1..12),
            label in prop::option::of(prop::sample::select(SentimentLabel::ALL.to_vec())),
        ) -> Tweet {
            Tweet { id: format!("id{ix}"), tokens, label }
        }
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        prop::collection::vec(Just(()), 0..12).prop_flat_map(|slots| {
            slots
                .iter()
                .enumerate()
                .map(|(i, _)| arb_tweet(i))
                .collect::<Vec<_>>()
                .prop_map(|tweets| Dataset::new(Split::Other, tweets))
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(d in arb_dataset()) {
            let text = dataset_to_string(&d);
            let back = parse_str(&text, false).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn canonical_form_is_stable(d in arb_dataset()) {
            let once = dataset_to_string(&d);
            let twice = dataset_to_string(&parse_str(&once, false).unwrap());
            prop_assert_eq!(once, twice);
        }
    }
}
