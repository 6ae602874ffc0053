//! Text normalization shared by documents and queries.
//!
//! Tokens are maximal runs of alphanumeric characters. Each run is lowercased,
//! dropped if it is a stopword, and otherwise stemmed with the Snowball English
//! (Porter2) stemmer. Offsets are UTF-8 byte offsets into the input text, so
//! `&text[start..end]` is always the surface form of a token.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag of the bundled stopword list. Bump when the list changes.
pub const STOPWORDS_VERSION: &str = "lucene-en-33/v1";

const BUNDLED_STOPWORDS: &str = include_str!("stopwords.txt");

/// Tokens of a text with byte offsets back into it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    /// Normalized terms (lowercased, stemmed when enabled).
    pub tokens: Vec<String>,
    /// Lowercased surface forms before stemming, used for embedding lookup.
    pub surfaces: Vec<String>,
    /// `(start, end)` byte span of each token's surface form.
    pub offsets: Vec<(usize, usize)>,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn push(&mut self, token: String, surface: String, span: (usize, usize)) {
        self.tokens.push(token);
        self.surfaces.push(surface);
        self.offsets.push(span);
    }

    pub(crate) fn extend(&mut self, other: &TokenizedText) {
        self.tokens.extend(other.tokens.iter().cloned());
        self.surfaces.extend(other.surfaces.iter().cloned());
        self.offsets.extend(other.offsets.iter().copied());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerConfig {
    /// Replacement stopword file (one word per line). `None` uses the bundled list.
    #[serde(default)]
    pub stopwords_path: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub stemming: bool,
    /// Disable stopword removal entirely.
    #[serde(default = "default_true")]
    pub remove_stopwords: bool,
}

fn default_true() -> bool {
    true
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            stopwords_path: None,
            stemming: true,
            remove_stopwords: true,
        }
    }
}

/// Serializable description of an analyzer, with the stopword list resolved.
///
/// Persisted next to every artifact that stores tokenized text so that queries
/// are always normalized exactly like the indexed documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerSpec {
    pub stemming: bool,
    pub stopwords: Vec<String>,
}

pub struct Analyzer {
    stopwords: BTreeSet<String>,
    stemmer: Option<Stemmer>,
}

impl fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analyzer")
            .field("stopwords", &self.stopwords.len())
            .field("stemming", &self.stemmer.is_some())
            .finish()
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Self::from_spec(&AnalyzerSpec {
            stemming: true,
            stopwords: bundled_stopwords(),
        })
    }
}

pub fn bundled_stopwords() -> Vec<String> {
    parse_stopwords(BUNDLED_STOPWORDS)
}

fn parse_stopwords(text: &str) -> Vec<String> {
    let set: BTreeSet<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect();
    set.into_iter().collect()
}

impl Analyzer {
    pub fn from_config(config: &AnalyzerConfig) -> Result<Self> {
        let stopwords = if !config.remove_stopwords {
            Vec::new()
        } else if let Some(path) = &config.stopwords_path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_stopwords(&text)
        } else {
            bundled_stopwords()
        };
        Ok(Self::from_spec(&AnalyzerSpec {
            stemming: config.stemming,
            stopwords,
        }))
    }

    pub fn from_spec(spec: &AnalyzerSpec) -> Self {
        Self {
            stopwords: spec.stopwords.iter().cloned().collect(),
            stemmer: spec.stemming.then(|| Stemmer::create(Algorithm::English)),
        }
    }

    pub fn spec(&self) -> AnalyzerSpec {
        AnalyzerSpec {
            stemming: self.stemmer.is_some(),
            stopwords: self.stopwords.iter().cloned().collect(),
        }
    }

    pub fn is_stopword(&self, lowercased: &str) -> bool {
        self.stopwords.contains(lowercased)
    }

    /// Normalize a single surface form. Returns `None` for stopwords.
    pub fn normalize(&self, surface: &str) -> Option<String> {
        let lower = surface.to_lowercase();
        if self.is_stopword(&lower) {
            return None;
        }
        Some(self.stem(&lower))
    }

    fn stem(&self, lower: &str) -> String {
        match &self.stemmer {
            Some(stemmer) => stemmer.stem(lower).into_owned(),
            None => lower.to_owned(),
        }
    }

    pub fn tokenize(&self, text: &str) -> TokenizedText {
        self.tokenize_from(text, 0)
    }

    /// Tokenize `text`, shifting every offset by `base`.
    pub fn tokenize_from(&self, text: &str, base: usize) -> TokenizedText {
        let mut out = TokenizedText::default();
        let mut start: Option<usize> = None;
        for (i, ch) in text.char_indices() {
            if ch.is_alphanumeric() {
                if start.is_none() {
                    start = Some(i);
                }
            } else if let Some(s) = start.take() {
                self.emit(&mut out, text, s, i, base);
            }
        }
        if let Some(s) = start {
            self.emit(&mut out, text, s, text.len(), base);
        }
        out
    }

    fn emit(&self, out: &mut TokenizedText, text: &str, start: usize, end: usize, base: usize) {
        let lower = text[start..end].to_lowercase();
        if self.is_stopword(&lower) {
            return;
        }
        let token = self.stem(&lower);
        out.push(token, lower, (base + start, base + end));
    }
}
