//! Generated collections for tests, benchmarks and sanity experiments.
//!
//! Words are built from consonant-vowel syllables ending in a vowel, which the
//! English stemmer leaves untouched and which never collide with stopwords.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Zipf};

use crate::corpus::{RawDocument, Topic};
use crate::embeddings::EmbeddingStore;
use crate::eval::Qrels;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aou";

/// The `i`-th synthetic word, three syllables long.
pub fn word(i: usize) -> String {
    let syllables = CONSONANTS.len() * VOWELS.len();
    assert!(i < syllables.pow(3), "word index {i} out of range");
    let mut out = String::with_capacity(6);
    let mut rest = i;
    for _ in 0..3 {
        let s = rest % syllables;
        rest /= syllables;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
    }
    out
}

/// Documents whose words follow a Zipf distribution over `vocab` words, so
/// document frequencies span several orders of magnitude.
pub fn zipf_corpus(
    num_docs: usize,
    vocab: usize,
    len: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = Zipf::new(vocab as u64, 1.05).expect("valid zipf parameters");
    (0..num_docs)
        .map(|d| {
            let n = rng.gen_range(len.clone());
            let body: Vec<String> = (0..n)
                .map(|_| word(zipf.sample(&mut rng) as usize - 1))
                .collect();
            RawDocument {
                doc_id: format!("Z{d:05}"),
                title: None,
                body: body.join(" "),
            }
        })
        .collect()
}

/// A query of `len` words drawn uniformly from the first `vocab` words.
pub fn random_query(rng: &mut impl Rng, vocab: usize, len: usize) -> String {
    (0..len)
        .map(|_| word(rng.gen_range(0..vocab)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Unit-length Gaussian vectors for the given words.
pub fn random_embeddings(words: impl IntoIterator<Item = String>, dim: usize, seed: u64) -> EmbeddingStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors: Vec<(String, Vec<f64>)> = words
        .into_iter()
        .map(|w| {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = crate::embeddings::norm(&v);
            v.iter_mut().for_each(|x| *x /= n);
            (w, v)
        })
        .collect();
    EmbeddingStore::from_vectors(dim, vectors, seed).expect("non-empty vocabulary")
}

/// Shape of a planted collection.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub num_queries: usize,
    /// Documents containing both planted terms of a query close together.
    pub relevant_per_query: usize,
    /// Documents containing only one of the two planted terms, per term.
    pub distractors_per_term: usize,
    /// Extra documents made of filler words only.
    pub filler_docs: usize,
    pub doc_len: std::ops::RangeInclusive<usize>,
    pub filler_vocab: usize,
    /// Planted pairs are kept inside one window of this many tokens.
    pub passage_len: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    /// 20 queries and 200 documents.
    fn default() -> Self {
        Self {
            num_queries: 20,
            relevant_per_query: 4,
            distractors_per_term: 3,
            filler_docs: 0,
            doc_len: 120..=260,
            filler_vocab: 2000,
            passage_len: 100,
            dim: 50,
            seed: 7,
        }
    }
}

impl PlantedConfig {
    pub fn num_docs(&self) -> usize {
        self.num_queries * (self.relevant_per_query + 2 * self.distractors_per_term) + self.filler_docs
    }
}

/// A collection where a document is relevant to query `q` exactly when it
/// contains both of `q`'s planted terms next to each other. Distractors
/// repeat a single planted term, so they are retrieved but not relevant.
#[derive(Debug)]
pub struct PlantedCollection {
    pub docs: Vec<RawDocument>,
    pub topics: Vec<Topic>,
    pub qrels: Qrels,
    pub embeddings: EmbeddingStore,
}

#[derive(Clone, Copy)]
enum Role {
    Relevant(usize),
    OnlyFirst(usize),
    OnlySecond(usize),
    Filler,
}

pub fn planted_collection(cfg: &PlantedConfig) -> PlantedCollection {
    assert!(*cfg.doc_len.start() >= cfg.passage_len.min(8), "documents too short to plant terms");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let planted = |q: usize, k: usize| word(cfg.filler_vocab + 2 * q + k);

    let mut roles = Vec::with_capacity(cfg.num_docs());
    for q in 0..cfg.num_queries {
        roles.extend(std::iter::repeat_n(Role::Relevant(q), cfg.relevant_per_query));
        roles.extend(std::iter::repeat_n(Role::OnlyFirst(q), cfg.distractors_per_term));
        roles.extend(std::iter::repeat_n(Role::OnlySecond(q), cfg.distractors_per_term));
    }
    roles.extend(std::iter::repeat_n(Role::Filler, cfg.filler_docs));
    roles.shuffle(&mut rng);

    let mut docs = Vec::with_capacity(roles.len());
    let mut qrels = Qrels::new();
    for (d, role) in roles.into_iter().enumerate() {
        let doc_id = format!("D{d:04}");
        let n = rng.gen_range(cfg.doc_len.clone());
        let mut body: Vec<String> = (0..n)
            .map(|_| word(rng.gen_range(0..cfg.filler_vocab)))
            .collect();
        match role {
            Role::Relevant(q) => {
                // One or two adjacent pairs, each inside a single window.
                for _ in 0..rng.gen_range(1..=2) {
                    let windows = n.div_ceil(cfg.passage_len);
                    let w = rng.gen_range(0..windows);
                    let start = w * cfg.passage_len;
                    let end = (start + cfg.passage_len).min(n);
                    if end - start < 2 {
                        continue;
                    }
                    let p = rng.gen_range(start..end - 1);
                    body[p] = planted(q, 0);
                    body[p + 1] = planted(q, 1);
                }
                if !body.contains(&planted(q, 0)) {
                    body[0] = planted(q, 0);
                    body[1] = planted(q, 1);
                }
                qrels.insert(&format!("{:03}", q + 1), &doc_id, 1);
            }
            Role::OnlyFirst(q) | Role::OnlySecond(q) => {
                let k = usize::from(matches!(role, Role::OnlySecond(_)));
                for _ in 0..rng.gen_range(2..=4) {
                    let p = rng.gen_range(0..n);
                    body[p] = planted(q, k);
                }
                qrels.insert(&format!("{:03}", q + 1), &doc_id, 0);
            }
            Role::Filler => {}
        }
        let title = format!("{} {}", word(rng.gen_range(0..cfg.filler_vocab)), word(rng.gen_range(0..cfg.filler_vocab)));
        docs.push(RawDocument {
            doc_id,
            title: Some(title),
            body: sentences(&body),
        });
    }

    let topics = (0..cfg.num_queries)
        .map(|q| Topic {
            query_id: format!("{:03}", q + 1),
            title: format!("{} {}", planted(q, 0), planted(q, 1)),
            description: String::new(),
        })
        .collect();
    let vocab = (0..cfg.filler_vocab + 2 * cfg.num_queries).map(word);
    let embeddings = random_embeddings(vocab, cfg.dim, cfg.seed ^ 0x9e37_79b9);
    PlantedCollection {
        docs,
        topics,
        qrels,
        embeddings,
    }
}

/// Join words into capitalized sentences of twelve words.
fn sentences(words: &[String]) -> String {
    let mut out = String::new();
    for (i, chunk) in words.chunks(12).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let mut s = chunk.join(" ");
        s[..1].make_ascii_uppercase();
        out.push_str(&s);
        out.push('.');
    }
    out
}
