//! Relevance judgments, TREC run files, ranking metrics and fold splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_FOLDS: usize = 5;
pub const DEFAULT_CUTOFF: usize = 20;

/// `(query, doc) → grade` judgments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a judgment. Returns `false` (and keeps the old grade) if the pair
    /// was already judged.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> bool {
        let docs = self.judgments.entry(query_id.to_string()).or_default();
        if docs.contains_key(doc_id) {
            return false;
        }
        docs.insert(doc_id.to_string(), grade);
        true
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(query_id)?.get(doc_id).copied()
    }

    /// Grade, with unjudged documents counting as 0.
    pub fn label(&self, query_id: &str, doc_id: &str) -> u32 {
        self.grade(query_id, doc_id).unwrap_or(0)
    }

    pub fn query(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// Documents with grade ≥ 1.
    pub fn relevant(&self, query_id: &str) -> HashSet<&str> {
        self.judgments
            .get(query_id)
            .map(|docs| {
                docs.iter()
                    .filter(|(_, &g)| g >= 1)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.judgments.iter().flat_map(|(q, docs)| {
            docs.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g))
        })
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Read `qid iter docid grade` lines. Negative grades are read as 0.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    pub fn read_from(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let bad = |message: String| Error::Format {
                path: path.to_path_buf(),
                line: n + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [qid, _, doc, grade] = fields[..] else {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            };
            let grade: i64 = grade
                .parse()
                .map_err(|e| bad(format!("grade `{grade}`: {e}")))?;
            if grade < 0 {
                warn!("{}:{}: negative grade read as 0", path.display(), n + 1);
            }
            if !qrels.insert(qid, doc, grade.max(0) as u32) {
                return Err(bad(format!("duplicate judgment for ({qid}, {doc})")));
            }
        }
        Ok(qrels)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (q, d, g) in self.iter() {
            writeln!(w, "{q} 0 {d} {g}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

/// A ranked list of documents per query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    pub tag: String,
    rankings: BTreeMap<String, Vec<RunEntry>>,
}

impl Run {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            rankings: BTreeMap::new(),
        }
    }

    /// Set the ranking of a query from `(doc_id, score)` pairs already in rank
    /// order. Ranks are assigned from 1.
    pub fn set_ranking<S: Into<String>>(
        &mut self,
        query_id: &str,
        ranked: impl IntoIterator<Item = (S, f64)>,
    ) {
        let entries = ranked
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RunEntry {
                doc_id: doc_id.into(),
                rank: i + 1,
                score,
            })
            .collect();
        self.rankings.insert(query_id.to_string(), entries);
    }

    pub fn ranking(&self, query_id: &str) -> Option<&[RunEntry]> {
        self.rankings.get(query_id).map(Vec::as_slice)
    }

    pub fn doc_ids(&self, query_id: &str) -> Vec<&str> {
        self.ranking(query_id)
            .map(|r| r.iter().map(|e| e.doc_id.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn num_queries(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    /// Move every ranking of `other` into this run (replacing same queries).
    pub fn merge(&mut self, other: Run) {
        self.rankings.extend(other.rankings);
    }

    /// `qid Q0 docid rank score tag`, one line per entry.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let tag = if self.tag.is_empty() { "exsearch" } else { &self.tag };
        for (qid, entries) in &self.rankings {
            for e in entries {
                writeln!(w, "{qid} Q0 {} {} {:.6} {tag}", e.doc_id, e.rank, e.score)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    /// Parse a 6-column run. Entries of each query are ordered by rank.
    pub fn read_from(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut run = Run::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let bad = |message: String| Error::Format {
                path: path.to_path_buf(),
                line: n + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [qid, _, doc, rank, score, tag] = fields[..] else {
                return Err(bad(format!("expected 6 fields, found {}", fields.len())));
            };
            let rank: usize = rank.parse().map_err(|e| bad(format!("rank `{rank}`: {e}")))?;
            if rank == 0 {
                return Err(bad("ranks start at 1".into()));
            }
            let score: f64 = score
                .parse()
                .map_err(|e| bad(format!("score `{score}`: {e}")))?;
            if run.tag.is_empty() {
                run.tag = tag.to_string();
            }
            run.rankings.entry(qid.to_string()).or_default().push(RunEntry {
                doc_id: doc.to_string(),
                rank,
                score,
            });
        }
        for entries in run.rankings.values_mut() {
            entries.sort_by_key(|e| e.rank);
        }
        Ok(run)
    }
}

/// Mean over relevant retrieved documents of the precision at their rank,
/// divided by the total number of relevant documents.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], relevant: &HashSet<&str>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut seen = HashSet::new();
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in ranking.iter().enumerate() {
        let doc = doc.as_ref();
        if relevant.contains(doc) && seen.insert(doc) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

/// Fraction of the top `k` positions holding relevant documents; the
/// denominator is always `k`.
pub fn precision_at_k<S: AsRef<str>>(ranking: &[S], relevant: &HashSet<&str>, k: usize) -> f64 {
    assert!(k >= 1, "cutoff must be at least 1");
    let mut seen = HashSet::new();
    let mut hits = 0usize;
    for doc in ranking.iter().take(k) {
        let doc = doc.as_ref();
        if relevant.contains(doc) && seen.insert(doc) {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

/// nDCG with linear gain and `1 / log2(rank + 1)` discount, cut at `k`.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], grades: &BTreeMap<String, u32>, k: usize) -> f64 {
    assert!(k >= 1, "cutoff must be at least 1");
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let mut seen = HashSet::new();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| {
            let d = d.as_ref();
            if !seen.insert(d) {
                return 0.0;
            }
            grades.get(d).copied().unwrap_or(0) as f64 * discount(i)
        })
        .sum();
    let mut ideal: Vec<u32> = grades.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 * discount(i))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Sort query ids and deal them round-robin into [`NUM_FOLDS`] folds.
pub fn make_folds<S: AsRef<str>>(query_ids: &[S]) -> Result<Vec<Vec<String>>> {
    let ids: BTreeSet<&str> = query_ids.iter().map(AsRef::as_ref).collect();
    if ids.len() < NUM_FOLDS {
        return Err(Error::Folds(format!(
            "need at least {NUM_FOLDS} distinct queries, got {}",
            ids.len()
        )));
    }
    let mut folds = vec![Vec::new(); NUM_FOLDS];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % NUM_FOLDS].push(id.to_string());
    }
    Ok(folds)
}

/// Check that folds are non-empty and pairwise disjoint, and, when
/// `universe` is given, that together they cover exactly it.
pub fn validate_folds(folds: &[Vec<String>], universe: Option<&BTreeSet<String>>) -> Result<()> {
    if folds.len() < 3 {
        return Err(Error::Folds(format!(
            "need at least 3 folds (train, validation, test), got {}",
            folds.len()
        )));
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            return Err(Error::Folds(format!("fold {i} is empty")));
        }
        for q in fold {
            if let Some(prev) = owner.insert(q, i) {
                return Err(Error::Folds(format!(
                    "query `{q}` appears in folds {prev} and {i}"
                )));
            }
        }
    }
    if let Some(universe) = universe {
        if let Some(missing) = universe.iter().find(|q| !owner.contains_key(q.as_str())) {
            return Err(Error::Folds(format!("query `{missing}` is in no fold")));
        }
        if let Some(extra) = owner.keys().find(|q| !universe.contains(**q)) {
            return Err(Error::Folds(format!("fold query `{extra}` is unknown")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ap: f64,
    pub precision: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cutoff: usize,
    pub per_query: Vec<QueryMetrics>,
    pub map: f64,
    pub precision: f64,
    pub ndcg: f64,
    /// Queries in the run with no judgments at all.
    pub unjudged_queries: Vec<String>,
    /// Queries with judgments but no relevant document.
    pub no_relevant_queries: Vec<String>,
    /// True when no query could be evaluated; the means are then reported as 0.
    pub undefined: bool,
}

impl EvalReport {
    pub fn num_queries(&self) -> usize {
        self.per_query.len()
    }

    /// trec_eval-style `metric<TAB>qid<TAB>value` lines, per query then `all`.
    pub fn machine_lines(&self) -> Vec<String> {
        let k = self.cutoff;
        let mut out = Vec::new();
        for q in &self.per_query {
            out.push(format!("map\t{}\t{:.6}", q.query_id, q.ap));
            out.push(format!("P_{k}\t{}\t{:.6}", q.query_id, q.precision));
            out.push(format!("ndcg_cut_{k}\t{}\t{:.6}", q.query_id, q.ndcg));
        }
        out.push(format!("num_q\tall\t{}", self.num_queries()));
        out.push(format!("map\tall\t{:.6}", self.map));
        out.push(format!("P_{k}\tall\t{:.6}", self.precision));
        out.push(format!("ndcg_cut_{k}\tall\t{:.6}", self.ndcg));
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.cutoff;
        writeln!(f, "{:<12} {:>8} {:>8} {:>9}", "query", "AP", format!("P@{k}"), format!("nDCG@{k}"))?;
        for q in &self.per_query {
            writeln!(f, "{:<12} {:>8.4} {:>8.4} {:>9.4}", q.query_id, q.ap, q.precision, q.ndcg)?;
        }
        writeln!(
            f,
            "{:<12} {:>8.4} {:>8.4} {:>9.4}",
            format!("all ({})", self.num_queries()),
            self.map,
            self.precision,
            self.ndcg
        )?;
        if self.undefined {
            writeln!(f, "note: no evaluable queries; means reported as 0")?;
        }
        if !self.unjudged_queries.is_empty() {
            writeln!(f, "skipped (no judgments): {}", self.unjudged_queries.join(" "))?;
        }
        if !self.no_relevant_queries.is_empty() {
            writeln!(f, "skipped (no relevant): {}", self.no_relevant_queries.join(" "))?;
        }
        Ok(())
    }
}

/// Per-query AP, P@k and nDCG@k plus their means over every run query that
/// has at least one relevant judgment.
pub fn evaluate_run(run: &Run, qrels: &Qrels, k: usize) -> EvalReport {
    let mut per_query = Vec::new();
    let mut unjudged = Vec::new();
    let mut no_relevant = Vec::new();
    for qid in run.query_ids() {
        let Some(grades) = qrels.query(qid) else {
            warn!("run query `{qid}` has no judgments; excluded");
            unjudged.push(qid.to_string());
            continue;
        };
        let relevant = qrels.relevant(qid);
        if relevant.is_empty() {
            no_relevant.push(qid.to_string());
            continue;
        }
        let ranking = run.doc_ids(qid);
        per_query.push(QueryMetrics {
            query_id: qid.to_string(),
            ap: average_precision(&ranking, &relevant),
            precision: precision_at_k(&ranking, &relevant, k),
            ndcg: ndcg_at_k(&ranking, grades, k),
        });
    }
    let n = per_query.len();
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / n as f64
        }
    };
    EvalReport {
        cutoff: k,
        map: mean(|q| q.ap),
        precision: mean(|q| q.precision),
        ndcg: mean(|q| q.ndcg),
        per_query,
        unjudged_queries: unjudged,
        no_relevant_queries: no_relevant,
        undefined: n == 0,
    }
}
