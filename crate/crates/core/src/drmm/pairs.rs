use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::index::sample;
use rand::Rng;

use super::features::QueryFeatures;
use super::network::PairInput;
use crate::eval::{Qrels, Run};

/// Query id → ids of the units retrieved for it.
pub type RetrievedSets = BTreeMap<String, BTreeSet<String>>;

pub fn retrieved_sets(run: &Run) -> RetrievedSets {
    run.query_ids()
        .map(|q| {
            let docs = run.doc_ids(q).into_iter().map(str::to_string).collect();
            (q.to_string(), docs)
        })
        .collect()
}

/// Keep exactly the judgments whose `(query, doc)` pair was retrieved.
pub fn filter_qrels(qrels: &Qrels, retrieved: &RetrievedSets) -> Qrels {
    let mut out = Qrels::new();
    for qid in qrels.query_ids() {
        let Some(docs) = retrieved.get(qid) else {
            warn!("query `{qid}` has judgments but nothing retrieved; its judgments are dropped");
            continue;
        };
        for (doc, &grade) in qrels.query(qid).into_iter().flatten() {
            if docs.contains(doc) {
                out.insert(qid, doc, grade);
            }
        }
    }
    out
}

/// A `(d+, d−)` pair, as indices into a query's [`QueryFeatures::units`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingPair {
    /// Index into the query slice given to [`sample_pairs`].
    pub query: usize,
    pub positive: usize,
    pub negative: usize,
}

impl TrainingPair {
    pub fn input<'a>(&self, queries: &'a [QueryFeatures]) -> PairInput<'a> {
        let q = &queries[self.query];
        PairInput {
            gating_inputs: &q.gating_inputs,
            positive: &q.units[self.positive].histograms,
            negative: &q.units[self.negative].histograms,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSample {
    pub pairs: Vec<TrainingPair>,
    /// Queries without at least one relevant and one non-relevant unit.
    pub skipped_queries: Vec<String>,
}

/// Pair every relevant unit with up to `n_neg` non-relevant units of the same
/// query, drawn uniformly without replacement.
///
/// A unit's label is its document's grade (passages inherit it); unjudged
/// units count as non-relevant.
pub fn sample_pairs(
    queries: &[QueryFeatures],
    qrels: &Qrels,
    n_neg: usize,
    rng: &mut impl Rng,
) -> PairSample {
    let mut out = PairSample::default();
    for (qi, q) in queries.iter().enumerate() {
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (ui, u) in q.units.iter().enumerate() {
            if qrels.label(&q.query_id, &u.doc_id) >= 1 {
                positives.push(ui);
            } else {
                negatives.push(ui);
            }
        }
        if positives.is_empty() || negatives.is_empty() {
            out.skipped_queries.push(q.query_id.clone());
            continue;
        }
        let take = n_neg.min(negatives.len());
        for &pos in &positives {
            for j in sample(rng, negatives.len(), take).into_iter() {
                out.pairs.push(TrainingPair {
                    query: qi,
                    positive: pos,
                    negative: negatives[j],
                });
            }
        }
    }
    out
}
