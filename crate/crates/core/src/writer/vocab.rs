use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Stop-word list shipped with the crate.
pub fn default_stopwords() -> BTreeSet<String> {
    parse_word_list(DEFAULT_STOPWORDS)
}

/// One word per line; `#` comments and blank lines ignored.
pub fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// A token made only of punctuation characters.
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_punctuation())
}

/// Token index with reserved specials and the word classes exempt from
/// repetition masking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    stopwords: BTreeSet<String>,
}

impl Vocabulary {
    /// Keeps words seen at least `min_freq` times, most frequent first, ties
    /// alphabetical. Everything else maps to UNK.
    pub fn build<'a, I>(texts: I, min_freq: usize, stopwords: BTreeSet<String>) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in texts {
            for t in text {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq.max(1) && !SPECIALS.contains(t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Self::from_tokens(tokens, stopwords)
    }

    /// `tokens` must start with the four specials.
    pub fn from_tokens(tokens: Vec<String>, stopwords: BTreeSet<String>) -> Self {
        debug_assert!(tokens.iter().zip(SPECIALS).all(|(a, b)| a == b));
        let mut v = Vocabulary {
            tokens,
            index: HashMap::new(),
            stopwords,
        };
        v.reindex();
        v
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, UNK when absent.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_special(id: usize) -> bool {
        id <= UNK
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    /// Stop words and punctuation may repeat in decoded output.
    pub fn is_exempt(&self, word: &str) -> bool {
        self.stopwords.contains(word) || is_punctuation(word)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn frequency_floor_and_order() {
        let a = toks("b a a c c c");
        let b = toks("a c d");
        let v = Vocabulary::build([a.as_slice(), b.as_slice()], 2, default_stopwords());
        assert_eq!(&v.tokens()[4..], &["c".to_string(), "a".to_string()]);
        assert_eq!(v.id("d"), UNK);
        assert_eq!(v.id("</s>"), EOS);
    }

    #[test]
    fn exempt_classes() {
        let v = Vocabulary::build(std::iter::empty(), 1, default_stopwords());
        assert!(v.is_exempt("the"));
        assert!(v.is_exempt("."));
        assert!(v.is_exempt("),"));
        assert!(!v.is_exempt("snail"));
    }
}
