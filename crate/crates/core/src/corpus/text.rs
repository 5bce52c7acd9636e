//! Free-text normalization for order fields.
//!
//! Lowercase, replace everything that is not an ASCII letter or digit with a
//! space, split on whitespace, drop stopwords. Duplicates and order are kept.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::CorpusError;

/// Fixed 179-word English stopword list. Entries containing an apostrophe can
/// never match a token (apostrophes become separators) but are kept so the
/// list is complete.
pub const ENGLISH_STOPWORDS: [&str; 179] = [
    "i",
    "me",
    "my",
    "myself",
    "we",
    "our",
    "ours",
    "ourselves",
    "you",
    "you're",
    "you've",
    "you'll",
    "you'd",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "he",
    "him",
    "his",
    "himself",
    "she",
    "she's",
    "her",
    "hers",
    "herself",
    "it",
    "it's",
    "its",
    "itself",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
    "what",
    "which",
    "who",
    "whom",
    "this",
    "that",
    "that'll",
    "these",
    "those",
    "am",
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "have",
    "has",
    "had",
    "having",
    "do",
    "does",
    "did",
    "doing",
    "a",
    "an",
    "the",
    "and",
    "but",
    "if",
    "or",
    "because",
    "as",
    "until",
    "while",
    "of",
    "at",
    "by",
    "for",
    "with",
    "about",
    "against",
    "between",
    "into",
    "through",
    "during",
    "before",
    "after",
    "above",
    "below",
    "to",
    "from",
    "up",
    "down",
    "in",
    "out",
    "on",
    "off",
    "over",
    "under",
    "again",
    "further",
    "then",
    "once",
    "here",
    "there",
    "when",
    "where",
    "why",
    "how",
    "all",
    "any",
    "both",
    "each",
    "few",
    "more",
    "most",
    "other",
    "some",
    "such",
    "no",
    "nor",
    "not",
    "only",
    "own",
    "same",
    "so",
    "than",
    "too",
    "very",
    "s",
    "t",
    "can",
    "will",
    "just",
    "don",
    "don't",
    "should",
    "should've",
    "now",
    "d",
    "ll",
    "m",
    "o",
    "re",
    "ve",
    "y",
    "ain",
    "aren",
    "aren't",
    "couldn",
    "couldn't",
    "didn",
    "didn't",
    "doesn",
    "doesn't",
    "hadn",
    "hadn't",
    "hasn",
    "hasn't",
    "haven",
    "haven't",
    "isn",
    "isn't",
    "ma",
    "mightn",
    "mightn't",
    "mustn",
    "mustn't",
    "needn",
    "needn't",
    "shan",
    "shan't",
    "shouldn",
    "shouldn't",
    "wasn",
    "wasn't",
    "weren",
    "weren't",
    "won",
    "won't",
    "wouldn",
    "wouldn't",
];

/// Text normalizer holding the active stopword set.
#[derive(Debug, Clone)]
pub struct Normalizer {
    stopwords: HashSet<String>,
    custom: bool,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self {
            stopwords: ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            custom: false,
        }
    }
}

impl Normalizer {
    /// Normalizer with a caller-supplied stopword list.
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            stopwords: words.into_iter().map(Into::into).collect(),
            custom: true,
        }
    }

    /// Load a stopword override file: UTF-8, one token per line, `#` starts a comment.
    pub fn from_stopword_file(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path.as_ref())?;
        Ok(Self::with_stopwords(parse_stopword_list(&text)))
    }

    /// Stopwords in sorted order when this normalizer was built from a custom
    /// list; `None` for the embedded list.
    pub fn custom_stopwords(&self) -> Option<Vec<String>> {
        if !self.custom {
            return None;
        }
        let mut words: Vec<String> = self.stopwords.iter().cloned().collect();
        words.sort();
        Some(words)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn normalize(&self, raw: &str) -> Vec<String> {
        let lowered = raw.to_lowercase();
        let cleaned: String = lowered
            .chars()
            .map(|c| {
                if c.is_ascii_lowercase() || c.is_ascii_digit() {
                    c
                } else {
                    ' '
                }
            })
            .collect();
        cleaned
            .split_whitespace()
            .filter(|tok| !self.stopwords.contains(*tok))
            .map(str::to_string)
            .collect()
    }
}

fn parse_stopword_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        })
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(str::to_string)
        .collect()
}

/// Normalize with the embedded English stopword list.
pub fn normalize_text(raw: &str) -> Vec<String> {
    thread_local! {
        static DEFAULT: Normalizer = Normalizer::default();
    }
    DEFAULT.with(|n| n.normalize(raw))
}
