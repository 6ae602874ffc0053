use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_with_norms, norm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    /// `ln(1 + count)`.
    LogCount,
    Count,
    /// `count / |unit terms|`.
    Normalized,
}

impl fmt::Display for HistogramMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HistogramMode::LogCount => "logcount",
            HistogramMode::Count => "count",
            HistogramMode::Normalized => "normalized",
        })
    }
}

impl FromStr for HistogramMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logcount" | "lch" => Ok(HistogramMode::LogCount),
            "count" | "ch" => Ok(HistogramMode::Count),
            "normalized" | "nh" => Ok(HistogramMode::Normalized),
            other => Err(Error::Config(format!("unknown histogram mode `{other}`"))),
        }
    }
}

/// `num_bins` counts the exact-match bin: 30 bins are 29 equal-width
/// similarity bins over `[-1, 1)` followed by one exact-match bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub num_bins: usize,
    pub mode: HistogramMode,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            num_bins: 30,
            mode: HistogramMode::LogCount,
        }
    }
}

impl HistogramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 2 {
            return Err(Error::Config(format!(
                "num_bins must be >= 2 (one similarity bin plus the exact-match bin), got {}",
                self.num_bins
            )));
        }
        Ok(())
    }

    pub fn similarity_bins(&self) -> usize {
        self.num_bins - 1
    }

    /// Similarity bin of a cosine value. Values are clamped into `[-1, 1)`.
    pub fn bin_of(&self, cosine: f64) -> usize {
        let bins = self.similarity_bins();
        let pos = ((cosine.clamp(-1.0, 1.0) + 1.0) / 2.0 * bins as f64).floor();
        (pos.max(0.0) as usize).min(bins - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatchingHistogram {
    pub values: Vec<f64>,
}

/// A term with its embedding and the embedding's norm.
#[derive(Debug, Clone, Copy)]
pub struct TermRef<'a> {
    pub token: &'a str,
    pub vector: &'a [f64],
    pub norm: f64,
}

impl<'a> TermRef<'a> {
    pub fn new(token: &'a str, vector: &'a [f64]) -> Self {
        Self {
            token,
            vector,
            norm: norm(vector),
        }
    }
}

/// Raw interaction counts per bin, before the mode transform.
pub fn histogram_counts(
    query_term: &TermRef<'_>,
    unit_terms: &[TermRef<'_>],
    cfg: &HistogramConfig,
) -> Result<Vec<u32>> {
    cfg.validate()?;
    if unit_terms.is_empty() {
        return Err(Error::EmptyUnit);
    }
    let exact = cfg.num_bins - 1;
    let mut counts = vec![0u32; cfg.num_bins];
    for t in unit_terms {
        if t.token == query_term.token {
            counts[exact] += 1;
        } else {
            let c = cosine_with_norms(query_term.vector, query_term.norm, t.vector, t.norm);
            counts[cfg.bin_of(c)] += 1;
        }
    }
    Ok(counts)
}

pub fn transform_counts(counts: &[u32], unit_len: usize, mode: HistogramMode) -> MatchingHistogram {
    let values = counts
        .iter()
        .map(|&c| {
            let c = c as f64;
            match mode {
                HistogramMode::LogCount => (1.0 + c).ln(),
                HistogramMode::Count => c,
                HistogramMode::Normalized => c / unit_len as f64,
            }
        })
        .collect();
    MatchingHistogram { values }
}

/// Matching histogram of one query term against the terms of a text unit.
///
/// Terms whose token equals the query token go to the last (exact-match) bin;
/// every other term is binned by cosine similarity.
pub fn build_histogram(
    query_term: &TermRef<'_>,
    unit_terms: &[TermRef<'_>],
    cfg: &HistogramConfig,
) -> Result<MatchingHistogram> {
    let counts = histogram_counts(query_term, unit_terms, cfg)?;
    Ok(transform_counts(&counts, unit_terms.len(), cfg.mode))
}
