use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{split_passages, Analyzer, AnalyzerSpec, Passage, RawDocument, TokenizedText};
use crate::error::{Error, Result};

const STORE_FORMAT: &str = "exsearch-store";
const STORE_VERSION: u32 = 1;

/// A document together with everything derived from its text.
#[derive(Debug, Clone)]
pub struct AnalyzedDocument {
    pub raw: RawDocument,
    pub title_tokens: TokenizedText,
    pub body_tokens: TokenizedText,
    /// Title tokens followed by body tokens; what gets indexed and matched at
    /// document level. Offsets of the title part refer to the title string.
    pub full: TokenizedText,
    /// Passages over the body only, so that spans always point into the body.
    pub passages: Vec<Passage>,
}

impl AnalyzedDocument {
    pub fn analyze(raw: RawDocument, analyzer: &Analyzer, passage_len: usize) -> Self {
        let title_tokens = raw
            .title
            .as_deref()
            .map(|t| analyzer.tokenize(t))
            .unwrap_or_default();
        let body_tokens = analyzer.tokenize(&raw.body);
        let mut full = title_tokens.clone();
        full.extend(&body_tokens);
        let passages = split_passages(&raw.doc_id, &body_tokens, passage_len);
        Self {
            raw,
            title_tokens,
            body_tokens,
            full,
            passages,
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.raw.doc_id
    }

    pub fn body_len(&self) -> usize {
        self.raw.body.len()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreHeader {
    format: String,
    version: u32,
    analyzer: AnalyzerSpec,
    passage_len: usize,
    documents: usize,
}

/// All documents of a collection, keyed by `doc_id`.
#[derive(Debug)]
pub struct DocumentStore {
    analyzer: Analyzer,
    passage_len: usize,
    docs: BTreeMap<String, AnalyzedDocument>,
}

impl DocumentStore {
    /// Analyze `docs`. Later duplicates of a `doc_id` are dropped with a warning.
    pub fn build(
        docs: impl IntoIterator<Item = RawDocument>,
        analyzer: Analyzer,
        passage_len: usize,
    ) -> Result<Self> {
        if passage_len == 0 {
            return Err(Error::Config("passage_len must be at least 1".into()));
        }
        let mut map = BTreeMap::new();
        for raw in docs {
            if map.contains_key(&raw.doc_id) {
                warn!("duplicate document `{}` ignored", raw.doc_id);
                continue;
            }
            let doc = AnalyzedDocument::analyze(raw, &analyzer, passage_len);
            map.insert(doc.raw.doc_id.clone(), doc);
        }
        Ok(Self {
            analyzer,
            passage_len,
            docs: map,
        })
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn passage_len(&self) -> usize {
        self.passage_len
    }

    pub fn get(&self, doc_id: &str) -> Option<&AnalyzedDocument> {
        self.docs.get(doc_id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Documents in `doc_id` order.
    pub fn iter(&self) -> impl Iterator<Item = &AnalyzedDocument> {
        self.docs.values()
    }

    /// Units for a document-level index: `(doc_id, tokens)` for every document
    /// with at least one token. Empty documents are skipped with a warning.
    pub fn document_units(&self) -> Vec<(String, Vec<String>)> {
        self.iter()
            .filter_map(|d| {
                if d.full.is_empty() {
                    warn!("document `{}` has no tokens; not indexed", d.doc_id());
                    None
                } else {
                    Some((d.doc_id().to_string(), d.full.tokens.clone()))
                }
            })
            .collect()
    }

    /// Units for a passage-level index, one per passage.
    pub fn passage_units(&self) -> Vec<(String, Vec<String>)> {
        self.iter()
            .flat_map(|d| d.passages.iter())
            .map(|p| (p.unit_id(), p.text.tokens.clone()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = StoreHeader {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
            analyzer: self.analyzer.spec(),
            passage_len: self.passage_len,
            documents: self.docs.len(),
        };
        let io = |e| Error::io(path, e);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        for doc in self.docs.values() {
            serde_json::to_writer(&mut w, &doc.raw)?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let format_err = |line: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let header_line = lines
            .next()
            .ok_or_else(|| format_err(1, "empty document store".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: StoreHeader = serde_json::from_str(&header_line)
            .map_err(|e| format_err(1, format!("bad header: {e}")))?;
        if header.format != STORE_FORMAT || header.version != STORE_VERSION {
            return Err(Error::Artifact(format!(
                "{}: expected {STORE_FORMAT} v{STORE_VERSION}, found {} v{}",
                path.display(),
                header.format,
                header.version
            )));
        }
        let mut raws = Vec::with_capacity(header.documents);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawDocument =
                serde_json::from_str(&line).map_err(|e| format_err(i + 2, e.to_string()))?;
            raws.push(raw);
        }
        if raws.len() != header.documents {
            return Err(format_err(
                0,
                format!("header announces {} documents, found {}", header.documents, raws.len()),
            ));
        }
        Self::build(raws, Analyzer::from_spec(&header.analyzer), header.passage_len)
    }
}
