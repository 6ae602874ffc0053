//! Retrieve, re-rank and explain: BM25 candidates, DRMM re-ranking at
//! document or passage (maxP) granularity, and the result-page payload with
//! term weights and best-passage snippets.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentStore, Topic};
use crate::drmm::{
    gating_weights, DrmmModel, FeatureCache, FeatureExtractor, Granularity, QueryFeatures,
    QueryTerms, VectorCache,
};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::eval::Run;
use crate::index::{Index, RetrievalConfig};

pub const DEFAULT_PAGE_SIZE: usize = 5;

/// JSON Schema (draft 2020-12) of [`SerpPayload`] as served by `/api/search`.
pub const SERP_PAYLOAD_SCHEMA: &str = include_str!("../schema/serp_payload.schema.json");

/// A document's position after re-ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub doc_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
    pub best_passage_index: Option<usize>,
    pub best_passage_score: Option<f64>,
}

/// Rank documents by their units' model scores.
///
/// With several units per document (passages) the document takes its best
/// unit's score, the lowest passage index winning ties. Documents are sorted
/// by score descending, then doc id ascending.
pub fn rank_features(model: &DrmmModel, features: &QueryFeatures) -> Result<Vec<RankedResult>> {
    let scores = features.unit_scores(&model.params)?;
    let mut best: BTreeMap<&str, (f64, Option<usize>)> = BTreeMap::new();
    for (unit, score) in features.units.iter().zip(scores) {
        best.entry(&unit.doc_id)
            .and_modify(|(s, idx)| {
                let earlier = match (unit.passage_index, *idx) {
                    (Some(a), Some(b)) => a < b,
                    _ => false,
                };
                if score > *s || (score == *s && earlier) {
                    *s = score;
                    *idx = unit.passage_index;
                }
            })
            .or_insert((score, unit.passage_index));
    }
    let mut ranked: Vec<RankedResult> = best
        .into_iter()
        .map(|(doc_id, (score, idx))| RankedResult {
            doc_id: doc_id.to_string(),
            score,
            rank: 0,
            best_passage_index: idx,
            best_passage_score: idx.map(|_| score),
        })
        .collect();
    // The map iterates in doc id order and the sort is stable.
    ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ranked)
}

/// Score whole documents. Candidates missing from the store are dropped.
pub fn rerank_documents(
    model: &DrmmModel,
    extractor: &FeatureExtractor<'_>,
    query: &QueryTerms,
    candidates: &[String],
    cache: &mut VectorCache,
) -> Result<Vec<RankedResult>> {
    let f = extractor.query_features(query, candidates, Granularity::Document, cache)?;
    rank_features(model, &f)
}

/// Score every passage and give each document its best passage's score.
pub fn rerank_passages_maxp(
    model: &DrmmModel,
    extractor: &FeatureExtractor<'_>,
    query: &QueryTerms,
    candidates: &[String],
    cache: &mut VectorCache,
) -> Result<Vec<RankedResult>> {
    let f = extractor.query_features(query, candidates, Granularity::Passage, cache)?;
    rank_features(model, &f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    /// Surface form as typed, before stemming.
    pub term: String,
    pub weight: f64,
}

/// Gating distribution over the query terms, in query order.
pub fn explain_query(model: &DrmmModel, query: &QueryTerms) -> Result<Vec<TermWeight>> {
    if query.is_empty() {
        return Err(Error::UnanswerableQuery);
    }
    if let Some(bad) = query.gating_inputs.iter().find(|g| g.len() != model.gating_dim) {
        return Err(Error::Shape(format!(
            "gating input has {} values, model expects {}",
            bad.len(),
            model.gating_dim
        )));
    }
    let g = gating_weights(&model.params.gating, &query.gating_inputs);
    Ok(query
        .display_terms()
        .into_iter()
        .zip(g)
        .map(|(t, weight)| TermWeight {
            term: t.to_string(),
            weight,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SerpMode {
    Regular,
    #[default]
    Explainable,
}

impl fmt::Display for SerpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SerpMode::Regular => "regular",
            SerpMode::Explainable => "explainable",
        })
    }
}

impl FromStr for SerpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" | "R" => Ok(SerpMode::Regular),
            "explainable" | "E" => Ok(SerpMode::Explainable),
            other => Err(Error::Config(format!("unknown result page mode `{other}`"))),
        }
    }
}

/// Where a result's score came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultSource {
    Drmm,
    /// Backfilled from the BM25 list after re-ranking dropped documents.
    Bm25,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerpResult {
    pub rank: usize,
    pub doc_id: String,
    pub title: Option<String>,
    pub snippet_text: String,
    /// Byte range of the snippet in the document body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet_char_span: Option<[usize; 2]>,
    /// Body length in bytes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_char_length: Option<usize>,
    pub score: f64,
    pub source: ResultSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerpPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    pub query: String,
    pub mode: SerpMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term_weights: Option<Vec<TermWeight>>,
    pub results: Vec<SerpResult>,
}

impl SerpPayload {
    /// Drop the explanation fields for the regular page. The result list is
    /// untouched.
    pub fn into_mode(mut self, mode: SerpMode) -> Self {
        self.mode = mode;
        if mode == SerpMode::Regular {
            self.term_weights = None;
            for r in &mut self.results {
                r.snippet_char_span = None;
                r.doc_char_length = None;
            }
        }
        self
    }
}

/// The top `page_size` results with their best passage as snippet.
///
/// Results without a best passage (document-level scores, backfill) use the
/// first passage. Unknown documents are skipped.
pub fn build_serp(
    query: &QueryTerms,
    term_weights: Vec<TermWeight>,
    ranked: &[(RankedResult, ResultSource)],
    store: &DocumentStore,
    page_size: usize,
) -> SerpPayload {
    let mut results = Vec::new();
    for (r, source) in ranked {
        if results.len() == page_size {
            break;
        }
        let Some(doc) = store.get(&r.doc_id) else {
            warn!("result `{}` is not in the store; skipped", r.doc_id);
            continue;
        };
        let idx = r.best_passage_index.unwrap_or(0);
        let (start, end) = doc.passages.get(idx).map_or((0, 0), |p| p.char_span);
        results.push(SerpResult {
            rank: results.len() + 1,
            doc_id: r.doc_id.clone(),
            title: doc.raw.title.clone(),
            snippet_text: doc.raw.body[start..end].to_string(),
            snippet_char_span: Some([start, end]),
            doc_char_length: Some(doc.body_len()),
            score: r.score,
            source: *source,
        });
    }
    SerpPayload {
        query_id: Some(query.query_id.clone()).filter(|q| !q.is_empty()),
        query: query.text.clone(),
        mode: SerpMode::Explainable,
        term_weights: Some(term_weights),
        results,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub granularity: Granularity,
    pub k1: f64,
    pub b: f64,
    /// BM25 candidates passed to the re-ranker. `None` means 100 for
    /// passages and 1000 for documents.
    pub depth: Option<usize>,
    pub page_size: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let r = RetrievalConfig::default();
        Self {
            granularity: Granularity::Passage,
            k1: r.k1,
            b: r.b,
            depth: None,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl EngineConfig {
    pub fn depth(&self) -> usize {
        self.depth.unwrap_or(match self.granularity {
            Granularity::Passage => 100,
            Granularity::Document => 1000,
        })
    }

    pub fn retrieval(&self) -> RetrievalConfig {
        RetrievalConfig {
            k1: self.k1,
            b: self.b,
            depth: self.depth(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.retrieval().validate()?;
        if self.page_size == 0 {
            return Err(Error::Config("page_size must be positive".into()));
        }
        Ok(())
    }
}

/// All artifacts needed to answer queries. Read-only, so it can be shared
/// between concurrent requests.
#[derive(Debug)]
pub struct SearchEngine {
    pub store: DocumentStore,
    pub index: Index,
    pub embeddings: EmbeddingStore,
    pub model: DrmmModel,
    pub config: EngineConfig,
}

/// One query's re-ranked list plus everything needed to explain it.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub query: QueryTerms,
    pub ranked: Vec<RankedResult>,
    /// BM25 results beyond the re-ranked ones, best first.
    pub bm25_tail: Vec<(String, f64)>,
}

impl SearchEngine {
    pub fn new(
        store: DocumentStore,
        index: Index,
        embeddings: EmbeddingStore,
        model: DrmmModel,
        config: EngineConfig,
    ) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        let engine = Self {
            store,
            index,
            embeddings,
            model,
            config,
        };
        let expected = engine.extractor().gating_dim();
        if expected != engine.model.gating_dim {
            return Err(Error::Shape(format!(
                "model gating width {} does not match the {} gating input width {expected}",
                engine.model.gating_dim, engine.model.gating_input
            )));
        }
        Ok(engine)
    }

    pub fn extractor(&self) -> FeatureExtractor<'_> {
        FeatureExtractor {
            store: &self.store,
            embeddings: &self.embeddings,
            index: Some(&self.index),
            histogram: self.model.histogram,
            gating: self.model.gating_input,
        }
    }

    /// Retrieve with BM25 and re-rank the top `depth` documents.
    pub fn search(&self, query_id: &str, text: &str) -> Result<SearchOutcome> {
        let extractor = self.extractor();
        let query = extractor.query_terms(query_id, text)?;
        let depth = self.config.depth();
        let mut retrieval = self.config.retrieval();
        retrieval.depth = depth + self.config.page_size;
        let mut bm25 = self.index.retrieve_documents(&retrieval, &query.tokens.tokens);
        let tail = bm25.split_off(depth.min(bm25.len()));
        let candidates: Vec<String> = bm25.into_iter().map(|(d, _)| d).collect();
        let mut cache = VectorCache::new();
        let ranked = match self.config.granularity {
            Granularity::Passage => rerank_passages_maxp(&self.model, &extractor, &query, &candidates, &mut cache)?,
            Granularity::Document => rerank_documents(&self.model, &extractor, &query, &candidates, &mut cache)?,
        };
        Ok(SearchOutcome {
            query,
            ranked,
            bm25_tail: tail,
        })
    }

    /// The result page for a query. Both modes list the same results.
    pub fn serp(&self, text: &str, mode: SerpMode) -> Result<SerpPayload> {
        let outcome = self.search("", text)?;
        let weights = explain_query(&self.model, &outcome.query)?;
        let page = self.config.page_size;
        let mut list: Vec<(RankedResult, ResultSource)> = outcome
            .ranked
            .iter()
            .take(page)
            .map(|r| (r.clone(), ResultSource::Drmm))
            .collect();
        if list.len() < page {
            let seen: HashSet<String> = list.iter().map(|(r, _)| r.doc_id.clone()).collect();
            let backfill = outcome
                .bm25_tail
                .iter()
                .filter(|(d, _)| !seen.contains(d) && self.store.get(d).is_some());
            for (doc_id, score) in backfill.take(page - list.len()) {
                list.push((
                    RankedResult {
                        doc_id: doc_id.clone(),
                        score: *score,
                        rank: list.len() + 1,
                        best_passage_index: None,
                        best_passage_score: None,
                    },
                    ResultSource::Bm25,
                ));
            }
        }
        Ok(build_serp(&outcome.query, weights, &list, &self.store, page).into_mode(mode))
    }

    /// Re-ranked TREC run over `topics`. Unanswerable topics are skipped
    /// with a warning.
    pub fn run(&self, topics: &[Topic], tag: &str) -> Result<Run> {
        let mut run = Run::new(tag);
        for t in topics {
            match self.search(&t.query_id, &t.title) {
                Ok(o) => run.set_ranking(&t.query_id, o.ranked.into_iter().map(|r| (r.doc_id, r.score))),
                Err(Error::UnanswerableQuery) => {
                    warn!("topic {}: no terms left after preprocessing; skipped", t.query_id)
                }
                Err(e) => return Err(e),
            }
        }
        Ok(run)
    }
}

/// Features of every topic against its candidates in `candidates`, e.g. a
/// BM25 run. Topics without candidates or without terms are skipped with a
/// warning. With a cache, features computed earlier are reused.
pub fn topic_features(
    extractor: &FeatureExtractor<'_>,
    topics: &[Topic],
    candidates: &Run,
    granularity: Granularity,
    cache: Option<(&FeatureCache, &str)>,
) -> Result<Vec<QueryFeatures>> {
    let mut vectors = VectorCache::new();
    let mut out = Vec::new();
    for t in topics {
        let Some(ranking) = candidates.ranking(&t.query_id) else {
            warn!("topic {} has no candidates; skipped", t.query_id);
            continue;
        };
        let docs: Vec<String> = ranking.iter().map(|e| e.doc_id.clone()).collect();
        let query = match extractor.query_terms(&t.query_id, &t.title) {
            Ok(q) => q,
            Err(Error::UnanswerableQuery) => {
                warn!("topic {}: no terms left after preprocessing; skipped", t.query_id);
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut compute = || extractor.query_features(&query, &docs, granularity, &mut vectors);
        let f = match cache {
            Some((cache, context)) => {
                let key = crate::drmm::feature_key(
                    context,
                    &query,
                    &docs,
                    granularity,
                    &extractor.histogram,
                    extractor.gating,
                );
                cache.get_or_compute(&key, compute)?
            }
            None => compute()?,
        };
        out.push(f);
    }
    Ok(out)
}
