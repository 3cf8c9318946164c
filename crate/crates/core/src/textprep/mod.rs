//! Turns a raw review comment into a list of stemmed tokens.
//!
//! The pipeline runs five steps in a fixed order: tokenization, noise
//! removal, stopword removal, lowercasing and stemming. Because stopword
//! removal precedes lowercasing, stopwords are matched case-insensitively.

mod stem;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use stem::stem;

const ENGLISH_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// A fixed set of lowercase stopwords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    /// Parses one word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(lowercase_token)
            .collect();
        StopwordList { words }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    pub fn empty() -> Self {
        StopwordList {
            words: HashSet::new(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        Self::english()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stemmer {
    #[default]
    SnowballEnglish,
}

/// Toggles for the four optional steps. Tokenization always runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Steps {
    pub remove_noise: bool,
    pub remove_stopwords: bool,
    pub lowercase: bool,
    pub stem: bool,
}

impl Default for Steps {
    fn default() -> Self {
        Steps {
            remove_noise: true,
            remove_stopwords: true,
            lowercase: true,
            stem: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessConfig {
    pub stopwords: StopwordList,
    pub steps: Steps,
    pub stemmer: Stemmer,
}

/// Splits on Unicode whitespace, then peels leading and trailing runs of
/// non-alphanumeric characters into tokens of their own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let core_start = chunk.find(char::is_alphanumeric);
        let Some(start) = core_start else {
            tokens.push(chunk.to_string());
            continue;
        };
        let end = chunk
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_alphanumeric())
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(chunk.len());
        if start > 0 {
            tokens.push(chunk[..start].to_string());
        }
        tokens.push(chunk[start..end].to_string());
        if end < chunk.len() {
            tokens.push(chunk[end..].to_string());
        }
    }
    tokens
}

/// Drops tokens without a single alphabetic character.
pub fn remove_noise(tokens: Vec<String>) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphabetic))
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stopwords: &StopwordList) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stopwords.contains(&lowercase_token(t)))
        .collect()
}

/// Unicode simple (one-to-one) lowercase mapping.
pub fn lowercase_token(token: &str) -> String {
    token
        .chars()
        .map(|c| c.to_lowercase().next().unwrap_or(c))
        .collect()
}

pub fn lowercase(tokens: Vec<String>) -> Vec<String> {
    tokens.iter().map(|t| lowercase_token(t)).collect()
}

pub fn preprocess(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let steps = config.steps;
    let mut tokens = tokenize(text);
    if steps.remove_noise {
        tokens = remove_noise(tokens);
    }
    if steps.remove_stopwords {
        tokens = remove_stopwords(tokens, &config.stopwords);
    }
    if steps.lowercase {
        tokens = lowercase(tokens);
    }
    if steps.stem {
        tokens = match config.stemmer {
            Stemmer::SnowballEnglish => tokens.iter().map(|t| stem(t)).collect(),
        };
    }
    tokens
}
