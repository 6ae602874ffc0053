//! Fixtures shared by the benchmarks.

use exsearch_core::corpus::{Analyzer, DocumentStore, DEFAULT_PASSAGE_LEN};
use exsearch_core::drmm::{MatchingHistogram, ModelParams};
use exsearch_core::index::{Index, UnitKind};
use exsearch_core::synthetic::{random_query, zipf_corpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A document index over a Zipf corpus plus analyzed random queries.
pub fn bm25_fixture(docs: usize, queries: usize) -> (Index, Vec<Vec<String>>) {
    let raw = zipf_corpus(docs, 5000, 50..=400, 1);
    let store = DocumentStore::build(raw, Analyzer::default(), DEFAULT_PASSAGE_LEN).expect("store");
    let index = Index::build(store.document_units(), UnitKind::Document).expect("index");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let qs = (0..queries)
        .map(|_| {
            let len = rng.gen_range(2..=5);
            store.analyzer().tokenize(&random_query(&mut rng, 2000, len)).tokens
        })
        .collect();
    (index, qs)
}

pub fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// Default-shaped model and random histograms for `terms` query terms.
pub fn model_fixture(terms: usize, dim: usize) -> (ModelParams, Vec<Vec<f64>>, Vec<MatchingHistogram>, Vec<MatchingHistogram>) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = ModelParams::init(30, &[5, 5], dim, &mut rng);
    let gating = random_vectors(terms, dim, 4);
    let mut hist = || -> Vec<MatchingHistogram> {
        (0..terms)
            .map(|_| MatchingHistogram {
                values: (0..30).map(|_| rng.gen_range(0.0..3.0)).collect(),
            })
            .collect()
    };
    let pos = hist();
    let neg = hist();
    (params, gating, pos, neg)
}
