//! Slow, independent reference implementations used to check the real ones.
//!
//! Shared by the core integration tests and the acceptance suite. Nothing
//! here calls into the code under test except to read or perturb parameters.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use exsearch_core::drmm::{pair_loss, ModelParams, PairInput};

/// Score every document with BM25 from scratch and sort by score descending,
/// then id ascending. Documents scoring 0 are left out.
pub fn bm25_exhaustive(
    docs: &[(String, Vec<String>)],
    query: &[String],
    k1: f64,
    b: f64,
) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let avg = docs.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n;
    let df: Vec<f64> = query
        .iter()
        .map(|q| docs.iter().filter(|(_, t)| t.contains(q)).count() as f64)
        .collect();
    let mut scored: Vec<(String, f64)> = docs
        .iter()
        .map(|(id, terms)| {
            let dl = terms.len() as f64;
            let score = query
                .iter()
                .zip(&df)
                .map(|(q, &d)| {
                    let tf = terms.iter().filter(|t| *t == q).count() as f64;
                    if tf == 0.0 {
                        return 0.0;
                    }
                    let idf = ((n - d + 0.5) / (d + 0.5) + 1.0).ln();
                    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg))
                })
                .sum::<f64>();
            (id.clone(), score)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Bin by testing every (term, bin) combination against the bin's interval.
///
/// `num_bins - 1` similarity bins of width `2 / (num_bins - 1)` cover
/// `[-1, 1)`; a cosine of exactly 1 goes to the last similarity bin; equal
/// tokens go to the exact-match bin.
pub fn histogram_bruteforce(
    query: (&str, &[f64]),
    unit: &[(String, Vec<f64>)],
    num_bins: usize,
) -> Vec<u32> {
    let sim_bins = num_bins - 1;
    let width = 2.0 / sim_bins as f64;
    let mut counts = vec![0u32; num_bins];
    for (token, v) in unit {
        if token == query.0 {
            counts[num_bins - 1] += 1;
            continue;
        }
        let c = cosine(query.1, v);
        for (j, count) in counts.iter_mut().enumerate().take(sim_bins) {
            let lo = -1.0 + j as f64 * width;
            let hi = -1.0 + (j + 1) as f64 * width;
            let last = j == sim_bins - 1;
            if c >= lo && (c < hi || (last && c <= 1.0)) {
                *count += 1;
                break;
            }
        }
    }
    counts
}

/// Central finite differences of the pair loss with respect to every
/// parameter, in `ModelParams::blocks` order.
pub fn finite_difference_gradient(params: &ModelParams, pair: &PairInput<'_>, h: f64) -> Vec<f64> {
    let mut p = params.clone();
    let sizes: Vec<usize> = p.blocks().iter().map(|b| b.len()).collect();
    let mut out = Vec::new();
    for (bi, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = p.blocks()[bi][i];
            p.blocks_mut()[bi][i] = orig + h;
            let up = pair_loss(&p, pair).unwrap();
            p.blocks_mut()[bi][i] = orig - h;
            let down = pair_loss(&p, pair).unwrap();
            p.blocks_mut()[bi][i] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// Relative error with a floor so that two near-zero values compare equal.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// maxP over explicit passage scores: `(doc, score, best passage)` sorted by
/// score descending then doc id, the first maximal passage winning.
pub fn maxp_bruteforce(passage_scores: &BTreeMap<String, Vec<f64>>) -> Vec<(String, f64, usize)> {
    let mut out: Vec<(String, f64, usize)> = passage_scores
        .iter()
        .filter(|(_, s)| !s.is_empty())
        .map(|(doc, scores)| {
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            (doc.clone(), scores[best], best)
        })
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

/// Qrels rows as a set, intersected with the retrieved pairs.
pub fn filter_qrels_oracle(
    rows: &BTreeSet<(String, String, u32)>,
    retrieved: &BTreeSet<(String, String)>,
) -> BTreeSet<(String, String, u32)> {
    rows.iter()
        .filter(|(q, d, _)| retrieved.contains(&(q.clone(), d.clone())))
        .cloned()
        .collect()
}
