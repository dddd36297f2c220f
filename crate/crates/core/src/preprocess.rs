//! Tweet normalization for noisy code-mixed text.
//!
//! One pass applies, in order: lowercase, URL removal, mention replacement,
//! hashtag-marker stripping, contraction expansion, emoji policy, optional
//! Devanagari removal, punctuation-token removal, elongation normalization,
//! stopword removal. Later steps can occasionally manufacture input for
//! earlier ones (stripping `#` off `#@user` leaves a mention; shortening
//! `wwww.x` leaves a URL), so [`clean_tweet`] iterates the pass to a fixpoint;
//! without pathological contraction lexicons this converges within four
//! passes. [`clean_pass`] exposes the single pass.
//!
//! Every function here is total and pure. Language tags survive replacement
//! steps untouched.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::{LangTag, Token, Tweet};

/// Token emitted when cleaning removes everything, so downstream code can
/// rely on every tweet having at least one token.
pub const EMPTY_TOKEN: &str = "<empty>";

/// Replacement text used by [`EmojiPolicy::Placeholder`].
pub const EMOJI_PLACEHOLDER: &str = "<emoji>";

/// Sentinel for `max_char_run` meaning "never truncate".
pub const NO_ELONGATION_LIMIT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmojiPolicy {
    Keep,
    Drop,
    Placeholder,
}

/// Cleaning switches. `Default` is the configuration used throughout the
/// repo's experiments; `identity()` turns every step off.
///
/// Well-formedness, checked by [`PreprocessConfig::validate`]: placeholder
/// strings and stopword entries contain no whitespace, and when `lowercase`
/// is on they must already be lowercase or cleaning would not be idempotent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub drop_urls: bool,
    /// `Some(text)` replaces mentions with `text`; `None` leaves them alone.
    pub mention_placeholder: Option<String>,
    pub strip_hash_prefix: bool,
    pub drop_punct_tokens: bool,
    /// Maximal run of one repeated character kept by elongation
    /// normalization; [`NO_ELONGATION_LIMIT`] disables the step. Must be >= 1.
    pub max_char_run: usize,
    pub stopwords: BTreeSet<String>,
    pub emoji_policy: EmojiPolicy,
    /// Remove tokens containing Devanagari code points.
    pub drop_devanagari: bool,
    /// Short-form expansion lexicon, applied after lowercasing. Ships empty;
    /// values must be single whitespace-free tokens.
    pub contractions: BTreeMap<String, String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            drop_urls: true,
            mention_placeholder: Some("<user>".to_string()),
            strip_hash_prefix: true,
            drop_punct_tokens: true,
            max_char_run: 2,
            stopwords: default_stopwords(),
            emoji_policy: EmojiPolicy::Placeholder,
            drop_devanagari: false,
            contractions: BTreeMap::new(),
        }
    }
}

impl PreprocessConfig {
    /// Configuration under which [`clean_tweet`] is the identity.
    pub fn identity() -> Self {
        PreprocessConfig {
            lowercase: false,
            drop_urls: false,
            mention_placeholder: None,
            strip_hash_prefix: false,
            drop_punct_tokens: false,
            max_char_run: NO_ELONGATION_LIMIT,
            stopwords: BTreeSet::new(),
            emoji_policy: EmojiPolicy::Keep,
            drop_devanagari: false,
            contractions: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_char_run < 1 {
            return Err("max_char_run must be >= 1".to_string());
        }
        let check = |what: &str, s: &str| -> Result<(), String> {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(format!("{what} must be non-empty without whitespace: {s:?}"));
            }
            if self.lowercase && s.chars().any(char::is_uppercase) {
                return Err(format!(
                    "{what} must be lowercase when the lowercase step is on: {s:?}"
                ));
            }
            Ok(())
        };
        if let Some(p) = &self.mention_placeholder {
            check("mention placeholder", p)?;
        }
        for w in &self.stopwords {
            check("stopword", w)?;
        }
        for (k, v) in &self.contractions {
            check("contraction key", k)?;
            check("contraction value", v)?;
        }
        Ok(())
    }
}

/// Bundled default stopwords: frequent English function words plus frequent
/// romanized-Hindi function words. Negation words (not, no, never, nahi, na,
/// mat, ...) are deliberately absent; removing them would destroy sentiment
/// polarity cues.
pub fn default_stopwords() -> BTreeSet<String> {
    const WORDS: &[&str] = &[
        // English
        "a", "an", "the", "is", "am", "are", "was", "were", "be", "been", "to",
        "of", "in", "on", "at", "for", "with", "and", "or", "but", "it", "its",
        "this", "that", "these", "those", "i", "me", "my", "you", "your", "we",
        "our", "they",
        // Romanized Hindi
        "hai", "hain", "ho", "tha", "thi", "ka", "ki", "ke", "ko", "se", "me",
        "mein", "par", "aur", "bhi", "hi", "toh", "ye", "yeh", "wo", "woh",
        "ab", "jo", "kuch", "koi", "hum", "tum", "aap", "kya",
    ];
    WORDS.iter().map(|w| w.to_string()).collect()
}

/// Read a one-token-per-line stopword file. Blank lines and lines starting
/// with `#` are skipped; surrounding whitespace is trimmed.
pub fn load_stopwords(reader: impl BufRead) -> std::io::Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.trim();
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        out.insert(word.to_string());
    }
    Ok(out)
}

pub fn is_url(text: &str) -> bool {
    text.starts_with("http://") || text.starts_with("https://") || text.starts_with("www.")
}

pub fn is_mention(text: &str) -> bool {
    text.starts_with('@') && text.chars().count() > 1
}

fn is_punct_char(c: char) -> bool {
    c.is_ascii_punctuation()
        || ('\u{2000}'..='\u{206F}').contains(&c) // general punctuation: … – — “ ” ‘ ’
        || ('\u{20A0}'..='\u{20CF}').contains(&c) // currency signs
        || "¡¿«»§¶·©®™°±×÷´¨¦¬¢£¥".contains(c)
}

/// True iff every character is punctuation or a non-emoji symbol.
pub fn is_punct_only(text: &str) -> bool {
    !text.is_empty() && text.chars().all(is_punct_char)
}

fn is_emoji_char(c: char) -> bool {
    matches!(c,
        '\u{1F300}'..='\u{1F5FF}' // symbols & pictographs (includes skin tones)
        | '\u{1F600}'..='\u{1F64F}' // emoticons
        | '\u{1F680}'..='\u{1F6FF}' // transport & map
        | '\u{1F900}'..='\u{1F9FF}' // supplemental symbols
        | '\u{1FA70}'..='\u{1FAFF}' // symbols & pictographs extended-A
        | '\u{2600}'..='\u{26FF}'   // miscellaneous symbols
        | '\u{2700}'..='\u{27BF}'   // dingbats
        | '\u{2B00}'..='\u{2BFF}'   // misc symbols and arrows (⭐ ⬆)
        | '\u{1F1E6}'..='\u{1F1FF}' // regional indicators
    )
}

fn is_emoji_joiner(c: char) -> bool {
    matches!(c, '\u{200D}' | '\u{FE0E}' | '\u{FE0F}' | '\u{20E3}')
}

/// True iff the token is made of emoji code points (plus joiners/selectors).
pub fn is_emoji_token(text: &str) -> bool {
    !text.is_empty()
        && text.chars().all(|c| is_emoji_char(c) || is_emoji_joiner(c))
        && text.chars().any(is_emoji_char)
}

pub fn contains_devanagari(text: &str) -> bool {
    text.chars().any(|c| ('\u{0900}'..='\u{097F}').contains(&c))
}

/// Truncate every maximal run of a repeated character to `max_char_run`.
/// Total and idempotent; never lengthens its input.
pub fn normalize_elongation(text: &str, max_char_run: usize) -> String {
    assert!(max_char_run >= 1, "max_char_run must be >= 1");
    let mut out = String::with_capacity(text.len());
    let mut run_char: Option<char> = None;
    let mut run_len = 0usize;
    for c in text.chars() {
        if run_char == Some(c) {
            run_len += 1;
        } else {
            run_char = Some(c);
            run_len = 1;
        }
        if run_len <= max_char_run {
            out.push(c);
        }
    }
    out
}

pub fn step_lowercase(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    if !cfg.lowercase {
        return tokens;
    }
    tokens
        .into_iter()
        .map(|t| Token { text: t.text.to_lowercase(), lang: t.lang })
        .collect()
}

pub fn step_drop_urls(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    if !cfg.drop_urls {
        return tokens;
    }
    tokens.into_iter().filter(|t| !is_url(&t.text)).collect()
}

pub fn step_mentions(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    let Some(placeholder) = &cfg.mention_placeholder else {
        return tokens;
    };
    tokens
        .into_iter()
        .map(|t| {
            if is_mention(&t.text) {
                Token { text: placeholder.clone(), lang: t.lang }
            } else {
                t
            }
        })
        .collect()
}

pub fn step_strip_hash(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    if !cfg.strip_hash_prefix {
        return tokens;
    }
    tokens
        .into_iter()
        .filter_map(|t| {
            let stripped = t.text.trim_start_matches('#');
            if stripped.is_empty() {
                None
            } else if stripped.len() == t.text.len() {
                Some(t)
            } else {
                Some(Token { text: stripped.to_string(), lang: t.lang })
            }
        })
        .collect()
}

pub fn step_contractions(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    if cfg.contractions.is_empty() {
        return tokens;
    }
    tokens
        .into_iter()
        .map(|t| match cfg.contractions.get(&t.text) {
            Some(expansion) => Token { text: expansion.clone(), lang: t.lang },
            None => t,
        })
        .collect()
}

pub fn step_emoji(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    match cfg.emoji_policy {
        EmojiPolicy::Keep => tokens,
        EmojiPolicy::Drop => tokens.into_iter().filter(|t| !is_emoji_token(&t.text)).collect(),
        EmojiPolicy::Placeholder => tokens
            .into_iter()
            .map(|t| {
                if is_emoji_token(&t.text) {
                    Token { text: EMOJI_PLACEHOLDER.to_string(), lang: t.lang }
                } else {
                    t
                }
            })
            .collect(),
    }
}

pub fn step_devanagari(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    if !cfg.drop_devanagari {
        return tokens;
    }
    tokens.into_iter().filter(|t| !contains_devanagari(&t.text)).collect()
}

pub fn step_punct(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    if !cfg.drop_punct_tokens {
        return tokens;
    }
    tokens.into_iter().filter(|t| !is_punct_only(&t.text)).collect()
}

pub fn step_elongation(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    if cfg.max_char_run == NO_ELONGATION_LIMIT {
        return tokens;
    }
    tokens
        .into_iter()
        .map(|t| Token {
            text: normalize_elongation(&t.text, cfg.max_char_run),
            lang: t.lang,
        })
        .collect()
}

pub fn step_stopwords(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    if cfg.stopwords.is_empty() {
        return tokens;
    }
    tokens
        .into_iter()
        .filter(|t| !cfg.stopwords.contains(&t.text))
        .collect()
}

/// One application of the full step sequence.
pub fn clean_pass(tokens: Vec<Token>, cfg: &PreprocessConfig) -> Vec<Token> {
    let tokens = step_lowercase(tokens, cfg);
    let tokens = step_drop_urls(tokens, cfg);
    let tokens = step_mentions(tokens, cfg);
    let tokens = step_strip_hash(tokens, cfg);
    let tokens = step_contractions(tokens, cfg);
    let tokens = step_emoji(tokens, cfg);
    let tokens = step_devanagari(tokens, cfg);
    let tokens = step_punct(tokens, cfg);
    let tokens = step_elongation(tokens, cfg);
    step_stopwords(tokens, cfg)
}

/// Iteration cap for the cleaning fixpoint; only a cyclic contraction
/// lexicon can exhaust it.
const MAX_PASSES: usize = 8;

/// Clean one tweet. Total: if every token is removed, the result carries the
/// single [`EMPTY_TOKEN`] tagged [`LangTag::Other`], so N >= 1 always holds.
pub fn clean_tweet(tweet: &Tweet, cfg: &PreprocessConfig) -> Tweet {
    let mut tokens = tweet.tokens.clone();
    for _ in 0..MAX_PASSES {
        let next = clean_pass(tokens.clone(), cfg);
        let stable = next == tokens;
        tokens = next;
        if stable {
            break;
        }
    }
    if tokens.is_empty() {
        tokens.push(Token { text: EMPTY_TOKEN.to_string(), lang: LangTag::Other });
    }
    Tweet { id: tweet.id.clone(), tokens, label: tweet.label }
}
