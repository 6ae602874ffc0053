//! Collections, topics, text normalization and passaging.

mod analyzer;
mod store;
mod trec;

use serde::{Deserialize, Serialize};

pub use analyzer::{
    bundled_stopwords, Analyzer, AnalyzerConfig, AnalyzerSpec, TokenizedText, STOPWORDS_VERSION,
};
pub use store::{AnalyzedDocument, DocumentStore};
pub use trec::{
    parse_topics, parse_topics_str, parse_trec_collection, ParsedCollection, RecordError,
    write_topic_lines, write_trec_collection, TrecRecords,
};

pub const DEFAULT_PASSAGE_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub query_id: String,
    /// Query text used for retrieval.
    pub title: String,
    #[serde(default)]
    pub description: String,
}

/// A fixed-length, non-overlapping window over a document body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub doc_id: String,
    pub passage_index: usize,
    pub text: TokenizedText,
    /// Byte span in the document body, from the first token's start to the
    /// last token's end.
    pub char_span: (usize, usize),
}

impl Passage {
    pub fn tokens(&self) -> &[String] {
        &self.text.tokens
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Unit id used when passages are indexed on their own.
    pub fn unit_id(&self) -> String {
        passage_unit_id(&self.doc_id, self.passage_index)
    }
}

pub fn passage_unit_id(doc_id: &str, passage_index: usize) -> String {
    format!("{doc_id}#{passage_index}")
}

/// Split a document's body tokens into consecutive passages of `passage_len`
/// tokens. The final passage keeps whatever remains.
///
/// # Panics
///
/// If `passage_len` is zero.
pub fn split_passages(doc_id: &str, body: &TokenizedText, passage_len: usize) -> Vec<Passage> {
    assert!(passage_len >= 1, "passage_len must be at least 1");
    let n = body.len();
    (0..n)
        .step_by(passage_len)
        .enumerate()
        .map(|(passage_index, start)| {
            let end = (start + passage_len).min(n);
            let text = TokenizedText {
                tokens: body.tokens[start..end].to_vec(),
                surfaces: body.surfaces[start..end].to_vec(),
                offsets: body.offsets[start..end].to_vec(),
            };
            let char_span = (body.offsets[start].0, body.offsets[end - 1].1);
            Passage {
                doc_id: doc_id.to_string(),
                passage_index,
                text,
                char_span,
            }
        })
        .collect()
}
