//! Turning queries and candidate texts into model inputs.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use super::histogram::{build_histogram, HistogramConfig, MatchingHistogram, TermRef};
use super::network::ModelParams;
use crate::corpus::{Analyzer, DocumentStore, TokenizedText};
use crate::embeddings::{norm, EmbeddingStore};
use crate::error::{Error, Result};
use crate::index::Index;

/// What the term-gating network sees for each query term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatingInput {
    /// The term's embedding; the gating weight is a vector.
    Embedding,
    /// The term's idf; the gating weight is a scalar.
    Idf,
}

impl fmt::Display for GatingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatingInput::Embedding => "embedding",
            GatingInput::Idf => "idf",
        })
    }
}

impl FromStr for GatingInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(GatingInput::Embedding),
            "idf" => Ok(GatingInput::Idf),
            other => Err(Error::Config(format!("unknown gating input `{other}`"))),
        }
    }
}

/// Whether candidates are matched as whole documents or passage by passage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Document,
    Passage,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Document => "document",
            Granularity::Passage => "passage",
        })
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "document" => Ok(Granularity::Document),
            "passage" => Ok(Granularity::Passage),
            other => Err(Error::Config(format!("unknown granularity `{other}`"))),
        }
    }
}

/// A preprocessed query with everything the model needs per term.
#[derive(Debug, Clone)]
pub struct QueryTerms {
    pub query_id: String,
    pub text: String,
    pub tokens: TokenizedText,
    pub vectors: Vec<Vec<f64>>,
    pub gating_inputs: Vec<Vec<f64>>,
}

impl QueryTerms {
    /// Surface forms as typed by the user, in query order.
    pub fn display_terms(&self) -> Vec<&str> {
        self.tokens
            .offsets
            .iter()
            .map(|&(s, e)| &self.text[s..e])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitFeatures {
    pub unit_id: String,
    pub doc_id: String,
    /// Set in passage granularity.
    pub passage_index: Option<usize>,
    /// One histogram per query term.
    pub histograms: Vec<MatchingHistogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFeatures {
    pub query_id: String,
    pub gating_inputs: Vec<Vec<f64>>,
    pub units: Vec<UnitFeatures>,
}

impl QueryFeatures {
    pub fn unit_scores(&self, params: &ModelParams) -> Result<Vec<f64>> {
        self.units
            .iter()
            .map(|u| Ok(params.forward(&u.histograms, &self.gating_inputs)?.score))
            .collect()
    }

    /// Documents ranked by their best unit's score (lowest unit position wins
    /// ties), score descending then doc id ascending.
    pub fn rank_documents(&self, params: &ModelParams) -> Result<Vec<(String, f64)>> {
        let scores = self.unit_scores(params)?;
        let mut best: HashMap<&str, f64> = HashMap::new();
        for (u, s) in self.units.iter().zip(scores) {
            best.entry(&u.doc_id)
                .and_modify(|b| {
                    if s > *b {
                        *b = s
                    }
                })
                .or_insert(s);
        }
        let mut ranked: Vec<(String, f64)> =
            best.into_iter().map(|(d, s)| (d.to_string(), s)).collect();
        sort_ranked(&mut ranked);
        Ok(ranked)
    }
}

/// Score descending, id ascending.
pub fn sort_ranked(ranked: &mut [(String, f64)]) {
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
}

/// Embeddings of unit terms, keyed by lowercased surface form.
#[derive(Debug, Default)]
pub struct VectorCache {
    entries: HashMap<String, (Vec<f64>, f64)>,
}

impl VectorCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn fill<'s>(&mut self, embeddings: &EmbeddingStore, surfaces: impl Iterator<Item = &'s str>) {
        for s in surfaces {
            if !self.entries.contains_key(s) {
                let v = embeddings.vector(s).into_owned();
                let n = norm(&v);
                self.entries.insert(s.to_string(), (v, n));
            }
        }
    }

    fn term_refs<'a>(&'a self, text: &'a TokenizedText) -> Vec<TermRef<'a>> {
        text.tokens
            .iter()
            .zip(&text.surfaces)
            .map(|(token, surface)| {
                let (v, n) = &self.entries[surface.as_str()];
                TermRef {
                    token,
                    vector: v,
                    norm: *n,
                }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Builds query terms and matching histograms against a document store.
#[derive(Debug, Clone, Copy)]
pub struct FeatureExtractor<'a> {
    pub store: &'a DocumentStore,
    pub embeddings: &'a EmbeddingStore,
    /// Needed for [`GatingInput::Idf`].
    pub index: Option<&'a Index>,
    pub histogram: HistogramConfig,
    pub gating: GatingInput,
}

impl<'a> FeatureExtractor<'a> {
    pub fn analyzer(&self) -> &'a Analyzer {
        self.store.analyzer()
    }

    /// Preprocess a query with the collection's analyzer.
    pub fn query_terms(&self, query_id: &str, text: &str) -> Result<QueryTerms> {
        let tokens = self.analyzer().tokenize(text);
        if tokens.is_empty() {
            return Err(Error::UnanswerableQuery);
        }
        let vectors: Vec<Vec<f64>> = tokens
            .surfaces
            .iter()
            .map(|s| self.embeddings.vector(s).into_owned())
            .collect();
        let gating_inputs = match self.gating {
            GatingInput::Embedding => vectors.clone(),
            GatingInput::Idf => {
                let index = self.index.ok_or_else(|| {
                    Error::Config("idf gating input requires an index".into())
                })?;
                tokens.tokens.iter().map(|t| vec![index.idf(t)]).collect()
            }
        };
        Ok(QueryTerms {
            query_id: query_id.to_string(),
            text: text.to_string(),
            tokens,
            vectors,
            gating_inputs,
        })
    }

    /// One histogram per query term against `unit`.
    pub fn unit_histograms(
        &self,
        query: &QueryTerms,
        unit: &TokenizedText,
        cache: &mut VectorCache,
    ) -> Result<Vec<MatchingHistogram>> {
        if unit.is_empty() {
            return Err(Error::EmptyUnit);
        }
        cache.fill(self.embeddings, unit.surfaces.iter().map(String::as_str));
        let terms = cache.term_refs(unit);
        query
            .tokens
            .tokens
            .iter()
            .zip(&query.vectors)
            .map(|(token, v)| build_histogram(&TermRef::new(token, v), &terms, &self.histogram))
            .collect()
    }

    /// Features for every candidate document. Unknown documents and empty
    /// units are skipped with a warning.
    pub fn query_features(
        &self,
        query: &QueryTerms,
        candidates: &[String],
        granularity: Granularity,
        cache: &mut VectorCache,
    ) -> Result<QueryFeatures> {
        let mut units = Vec::new();
        for doc_id in candidates {
            let Some(doc) = self.store.get(doc_id) else {
                warn!("query {}: candidate `{doc_id}` is not in the store", query.query_id);
                continue;
            };
            match granularity {
                Granularity::Document => {
                    if doc.full.is_empty() {
                        warn!("document `{doc_id}` has no tokens; skipped");
                        continue;
                    }
                    units.push(UnitFeatures {
                        unit_id: doc_id.clone(),
                        doc_id: doc_id.clone(),
                        passage_index: None,
                        histograms: self.unit_histograms(query, &doc.full, cache)?,
                    });
                }
                Granularity::Passage => {
                    if doc.passages.is_empty() {
                        warn!("document `{doc_id}` has no passages; skipped");
                    }
                    for p in &doc.passages {
                        units.push(UnitFeatures {
                            unit_id: p.unit_id(),
                            doc_id: doc_id.clone(),
                            passage_index: Some(p.passage_index),
                            histograms: self.unit_histograms(query, &p.text, cache)?,
                        });
                    }
                }
            }
        }
        Ok(QueryFeatures {
            query_id: query.query_id.clone(),
            gating_inputs: query.gating_inputs.clone(),
            units,
        })
    }

    pub fn gating_dim(&self) -> usize {
        match self.gating {
            GatingInput::Embedding => self.embeddings.dim(),
            GatingInput::Idf => 1,
        }
    }
}
