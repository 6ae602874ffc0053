//! Immutable inverted index with BM25 retrieval.
//!
//! Unit ids are stored sorted, and the internal numeric id of a unit is its
//! position in that order, so every "ascending unit id" tie rule reduces to
//! comparing integers.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INDEX_MAGIC: &str = "exsearch-index";
const INDEX_VERSION: u32 = 1;

/// What the indexed units are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Document,
    Passage,
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitKind::Document => "document",
            UnitKind::Passage => "passage",
        })
    }
}

impl FromStr for UnitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "document" => Ok(UnitKind::Document),
            "passage" => Ok(UnitKind::Passage),
            other => Err(Error::Config(format!("unknown unit kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k1: f64,
    pub b: f64,
    /// Candidate depth K.
    pub depth: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k1: 0.9,
            b: 0.4,
            depth: 1000,
        }
    }
}

impl RetrievalConfig {
    pub fn with_depth(depth: usize) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1.is_nan() || self.k1 < 0.0 {
            return Err(Error::Config(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must be in [0, 1], got {}", self.b)));
        }
        if self.depth == 0 {
            return Err(Error::Config("retrieval depth must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub unit: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    kind: UnitKind,
    unit_ids: Vec<String>,
    lengths: Vec<u32>,
    avg_length: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

/// Robertson–Spärck Jones idf with `+1` inside the log, never negative.
pub fn bm25_idf(num_units: usize, df: usize) -> f64 {
    let n = num_units as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Smoothed idf used as the scalar term-gating input. Distinct from
/// [`bm25_idf`]: it is always at least 1 and terms missing from the index get
/// the largest value, `ln(N + 1) + 1`.
pub fn gating_idf(num_units: usize, df: usize) -> f64 {
    ((num_units as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
}

impl Index {
    /// Build an index over `(unit_id, tokens)` pairs. Input order does not
    /// matter. Zero units yield an empty index whose searches return nothing.
    pub fn build<I, S, T>(units: I, kind: UnitKind) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut units: Vec<(String, Vec<T>)> =
            units.into_iter().map(|(id, t)| (id.into(), t)).collect();
        units.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in units.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateUnit(pair[0].0.clone()));
            }
        }

        let mut unit_ids = Vec::with_capacity(units.len());
        let mut lengths = Vec::with_capacity(units.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (i, (id, tokens)) in units.into_iter().enumerate() {
            if id.is_empty() || id.contains(['\t', '\n', '\r']) {
                return Err(Error::Config(format!("invalid unit id {id:?}")));
            }
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &tokens {
                *counts.entry(t.as_ref()).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term.to_string()).or_default().push(Posting {
                    unit: i as u32,
                    tf,
                });
            }
            unit_ids.push(id);
            lengths.push(tokens.len() as u32);
        }
        Ok(Self::assemble(kind, unit_ids, lengths, postings))
    }

    fn assemble(
        kind: UnitKind,
        unit_ids: Vec<String>,
        lengths: Vec<u32>,
        postings: BTreeMap<String, Vec<Posting>>,
    ) -> Self {
        let avg_length = if lengths.is_empty() {
            0.0
        } else {
            lengths.iter().map(|&l| l as f64).sum::<f64>() / lengths.len() as f64
        };
        Self {
            kind,
            unit_ids,
            lengths,
            avg_length,
            postings,
        }
    }

    pub fn kind(&self) -> UnitKind {
        self.kind
    }

    pub fn num_units(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn avg_length(&self) -> f64 {
        self.avg_length
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn unit_index(&self, unit_id: &str) -> Option<usize> {
        self.unit_ids
            .binary_search_by(|probe| probe.as_str().cmp(unit_id))
            .ok()
    }

    pub fn unit_length(&self, unit_id: &str) -> Option<u32> {
        self.unit_index(unit_id).map(|i| self.lengths[i])
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn term_frequency(&self, term: &str, unit_id: &str) -> u32 {
        let Some(u) = self.unit_index(unit_id) else {
            return 0;
        };
        let list = self.postings(term);
        list.binary_search_by_key(&(u as u32), |p| p.unit)
            .map(|i| list[i].tf)
            .unwrap_or(0)
    }

    /// Idf for the term-gating network (see [`gating_idf`]).
    pub fn idf(&self, term: &str) -> f64 {
        gating_idf(self.num_units(), self.df(term))
    }

    fn term_weight(&self, cfg: &RetrievalConfig, idf: f64, tf: u32, len: u32) -> f64 {
        let tf = tf as f64;
        let norm = 1.0 - cfg.b + cfg.b * len as f64 / self.avg_length;
        idf * tf * (cfg.k1 + 1.0) / (tf + cfg.k1 * norm)
    }

    /// BM25 score of one unit. Repeated query terms count once per occurrence.
    /// Returns `None` if the unit is not indexed.
    pub fn bm25_score(&self, cfg: &RetrievalConfig, query: &[String], unit_id: &str) -> Option<f64> {
        let u = self.unit_index(unit_id)?;
        let len = self.lengths[u];
        let mut score = 0.0;
        for term in query {
            let list = self.postings(term);
            if let Ok(i) = list.binary_search_by_key(&(u as u32), |p| p.unit) {
                let idf = bm25_idf(self.num_units(), list.len());
                score += self.term_weight(cfg, idf, list[i].tf, len);
            }
        }
        Some(score)
    }

    fn accumulate(&self, cfg: &RetrievalConfig, query: &[String]) -> Vec<(u32, f64)> {
        let mut acc = vec![0.0f64; self.num_units()];
        let mut touched = vec![false; self.num_units()];
        for term in query {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = bm25_idf(self.num_units(), list.len());
            for p in list {
                let u = p.unit as usize;
                acc[u] += self.term_weight(cfg, idf, p.tf, self.lengths[u]);
                touched[u] = true;
            }
        }
        acc.into_iter()
            .enumerate()
            .filter(|&(u, s)| touched[u] && s > 0.0)
            .map(|(u, s)| (u as u32, s))
            .collect()
    }

    /// Top `cfg.depth` units by BM25, score descending then unit id ascending.
    /// Units scoring zero are never returned.
    pub fn retrieve_topk(&self, cfg: &RetrievalConfig, query: &[String]) -> Vec<(String, f64)> {
        let mut scored = self.accumulate(cfg, query);
        top_k(&mut scored, cfg.depth);
        scored
            .into_iter()
            .map(|(u, s)| (self.unit_ids[u as usize].clone(), s))
            .collect()
    }

    /// Document-level retrieval regardless of the unit kind. On a passage index
    /// each document is scored by its best passage.
    pub fn retrieve_documents(
        &self,
        cfg: &RetrievalConfig,
        query: &[String],
    ) -> Vec<(String, f64)> {
        match self.kind {
            UnitKind::Document => self.retrieve_topk(cfg, query),
            UnitKind::Passage => {
                let mut best: BTreeMap<&str, f64> = BTreeMap::new();
                for (u, s) in self.accumulate(cfg, query) {
                    let doc = doc_of_passage(&self.unit_ids[u as usize]);
                    let e = best.entry(doc).or_insert(s);
                    if s > *e {
                        *e = s;
                    }
                }
                let mut docs: Vec<(String, f64)> =
                    best.into_iter().map(|(d, s)| (d.to_string(), s)).collect();
                docs.sort_by(|a, b| cmp_desc(a.1, b.1).then_with(|| a.0.cmp(&b.0)));
                docs.truncate(cfg.depth);
                docs
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Line-based layout:
    ///
    /// ```text
    /// exsearch-index <version>
    /// kind <document|passage>
    /// units <N>
    /// terms <T>
    /// U\t<unit_id>\t<length>          (N lines, unit id order)
    /// T\t<term>\t<unit>:<tf> ...      (T lines, term order; unit = line number among U lines)
    /// ```
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{INDEX_MAGIC} {INDEX_VERSION}")?;
        writeln!(w, "kind {}", self.kind)?;
        writeln!(w, "units {}", self.num_units())?;
        writeln!(w, "terms {}", self.num_terms())?;
        for (id, len) in self.unit_ids.iter().zip(&self.lengths) {
            writeln!(w, "U\t{id}\t{len}")?;
        }
        for (term, list) in &self.postings {
            write!(w, "T\t{term}\t")?;
            for (i, p) in list.iter().enumerate() {
                if i > 0 {
                    w.write_all(b" ")?;
                }
                write!(w, "{}:{}", p.unit, p.tf)?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    pub fn read_from(reader: impl BufRead, path: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(bad(i + 1, e.to_string())),
                None => Err(bad(0, format!("unexpected end of file, expected {what}"))),
            }
        };

        let (n, magic) = next("header")?;
        match magic.split_once(' ') {
            Some((INDEX_MAGIC, v)) if v == INDEX_VERSION.to_string() => {}
            Some((INDEX_MAGIC, v)) => {
                return Err(Error::Artifact(format!("index version {v} is not supported")))
            }
            _ => return Err(bad(n, "not an exsearch index".into())),
        }
        let mut field = |name: &str| -> Result<String> {
            let (n, line) = next(name)?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(n, format!("expected `{name}`")))
        };
        let kind: UnitKind = field("kind")?.parse()?;
        let num_units: usize = field("units")?
            .parse()
            .map_err(|e| bad(3, format!("units: {e}")))?;
        let num_terms: usize = field("terms")?
            .parse()
            .map_err(|e| bad(4, format!("terms: {e}")))?;

        let mut unit_ids = Vec::with_capacity(num_units);
        let mut lengths = Vec::with_capacity(num_units);
        for _ in 0..num_units {
            let (n, line) = next("unit line")?;
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some("U"), Some(id), Some(len), None) => {
                    unit_ids.push(id.to_string());
                    lengths.push(len.parse().map_err(|e| bad(n, format!("length: {e}")))?);
                }
                _ => return Err(bad(n, "malformed unit line".into())),
            }
        }
        if unit_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad(0, "unit ids not strictly sorted".into()));
        }

        let mut postings = BTreeMap::new();
        for _ in 0..num_terms {
            let (n, line) = next("term line")?;
            let mut parts = line.splitn(3, '\t');
            let (Some("T"), Some(term), Some(list)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(n, "malformed term line".into()));
            };
            let mut entries = Vec::new();
            for item in list.split(' ').filter(|s| !s.is_empty()) {
                let (u, tf) = item
                    .split_once(':')
                    .ok_or_else(|| bad(n, format!("bad posting `{item}`")))?;
                let unit: u32 = u.parse().map_err(|e| bad(n, format!("posting: {e}")))?;
                let tf: u32 = tf.parse().map_err(|e| bad(n, format!("posting: {e}")))?;
                if unit as usize >= num_units || tf == 0 {
                    return Err(bad(n, format!("posting `{item}` out of range")));
                }
                if entries.last().is_some_and(|p: &Posting| p.unit >= unit) {
                    return Err(bad(n, "postings not sorted".into()));
                }
                entries.push(Posting { unit, tf });
            }
            postings.insert(term.to_string(), entries);
        }
        if let Some((n, _)) = lines.next() {
            return Err(bad(n + 1, "trailing data".into()));
        }
        Ok(Self::assemble(kind, unit_ids, lengths, postings))
    }
}

/// The document id part of a passage unit id (`doc#index`).
pub fn doc_of_passage(unit_id: &str) -> &str {
    unit_id.rsplit_once('#').map(|(d, _)| d).unwrap_or(unit_id)
}

fn cmp_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Keep the `k` best `(unit, score)` pairs, sorted.
fn top_k(scored: &mut Vec<(u32, f64)>, k: usize) {
    let order = |a: &(u32, f64), b: &(u32, f64)| cmp_desc(a.1, b.1).then(a.0.cmp(&b.0));
    if scored.len() > k {
        scored.select_nth_unstable_by(k, order);
        scored.truncate(k);
    }
    scored.sort_by(order);
}
