//! Character vocabulary and 1-d CNN configuration for the char branch.

use std::collections::{BTreeSet, HashMap};

/// Character-to-index map built from a training corpus. Index 0 is reserved
/// for the UNK character, so any text (seen or not) maps to valid indices and
/// no token can fail to embed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub const UNK_INDEX: usize = 0;
    /// Placeholder stored at index 0; never produced by lookups on real text.
    pub const UNK_CHAR: char = '\u{0}';

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let unique: BTreeSet<char> = texts.into_iter().flat_map(|t| t.chars()).collect();
        Self::from_ordered_chars(unique)
    }

    /// Rebuild a vocabulary from its stored non-UNK characters, preserving
    /// their order (used when loading checkpoints).
    pub fn from_ordered_chars(ordered: impl IntoIterator<Item = char>) -> Self {
        let mut chars = vec![Self::UNK_CHAR];
        chars.extend(ordered);
        let index = chars
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| (c, i))
            .collect();
        CharVocab { chars, index }
    }

    /// UNK-only vocabulary, for models whose char branch is disabled.
    pub fn empty() -> Self {
        Self::from_ordered_chars([])
    }

    /// Number of indices, UNK included.
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        // UNK is always present.
        false
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index_of(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(Self::UNK_INDEX)
    }

    /// Indices for every character of `token`; an empty token degenerates to
    /// a single UNK so downstream convolution always sees at least one step.
    pub fn indices(&self, token: &str) -> Vec<usize> {
        if token.is_empty() {
            return vec![Self::UNK_INDEX];
        }
        token.chars().map(|c| self.index_of(c)).collect()
    }

    /// FNV-1a over the ordered character list; checkpoint headers use this to
    /// detect a vocabulary mismatch before shapes even get compared.
    pub fn hash64(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for &c in &self.chars {
            for b in (c as u32).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

/// Split `output_dim` filters across `n_widths` filter widths as evenly as
/// possible; earlier widths take the remainder.
pub fn filters_for(output_dim: usize, n_widths: usize) -> Vec<usize> {
    assert!(n_widths >= 1, "need at least one filter width");
    let base = output_dim / n_widths;
    let rem = output_dim % n_widths;
    (0..n_widths)
        .map(|i| base + usize::from(i < rem))
        .collect()
}

pub const DEFAULT_CHAR_EMB_DIM: usize = 32;
pub const DEFAULT_FILTER_WIDTHS: [usize; 3] = [2, 3, 4];

/// Per-word char-CNN: embed characters, convolve at several widths, max-pool
/// over time, concatenate the pooled maps into one `output_dim` column.
#[derive(Debug, Clone, PartialEq)]
pub struct CharCnnConfig {
    pub vocab: CharVocab,
    pub char_emb_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: Vec<usize>,
    pub output_dim: usize,
}

impl CharCnnConfig {
    /// Defaults around a corpus-built vocabulary: 32-d char embeddings,
    /// widths {2,3,4}, filters summing to `output_dim` = 256.
    pub fn new(vocab: CharVocab) -> Self {
        Self::with_output_dim(vocab, 256)
    }

    pub fn with_output_dim(vocab: CharVocab, output_dim: usize) -> Self {
        CharCnnConfig {
            vocab,
            char_emb_dim: DEFAULT_CHAR_EMB_DIM,
            filter_widths: DEFAULT_FILTER_WIDTHS.to_vec(),
            filters_per_width: filters_for(output_dim, DEFAULT_FILTER_WIDTHS.len()),
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.char_emb_dim == 0 {
            return Err("char_emb_dim must be >= 1".into());
        }
        if self.filter_widths.is_empty() {
            return Err("need at least one filter width".into());
        }
        if self.filter_widths.iter().any(|&w| w == 0) {
            return Err(format!("filter widths must be >= 1, got {:?}", self.filter_widths));
        }
        if self.filter_widths.len() != self.filters_per_width.len() {
            return Err(format!(
                "{} widths but {} filter counts",
                self.filter_widths.len(),
                self.filters_per_width.len()
            ));
        }
        let total: usize = self.filters_per_width.iter().sum();
        if total != self.output_dim {
            return Err(format!(
                "filters per width {:?} sum to {total}, output_dim is {}",
                self.filters_per_width, self.output_dim
            ));
        }
        Ok(())
    }
}

impl Default for CharCnnConfig {
    fn default() -> Self {
        Self::new(CharVocab::empty())
    }
}
