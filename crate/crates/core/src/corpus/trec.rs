//! Readers for TREC SGML-style collections and topic files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;

use super::{RawDocument, Topic};
use crate::error::{Error, Result};

/// Tags whose content is taken as the document title, in order of preference.
const TITLE_TAGS: &[&str] = &["HEADLINE", "TITLE", "HEAD", "HL"];
/// Tags whose content makes up the document body.
const TEXT_TAGS: &[&str] = &["TEXT"];

/// A `<DOC>` record that could not be turned into a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub path: PathBuf,
    /// 0-based ordinal of the record within its file.
    pub record: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedCollection {
    pub documents: Vec<RawDocument>,
    pub errors: Vec<RecordError>,
}

/// Parse a collection file, or every regular file below a directory.
///
/// Malformed records are collected in [`ParsedCollection::errors`] and parsing
/// continues. The returned documents are sorted by `doc_id`.
pub fn parse_trec_collection(path: &Path) -> Result<ParsedCollection> {
    let mut files = Vec::new();
    collect_files(path, &mut files)?;
    files.sort();

    let mut out = ParsedCollection::default();
    for file in files {
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let text = String::from_utf8_lossy(&bytes);
        for (record, parsed) in TrecRecords::new(&text).enumerate() {
            match parsed {
                Ok(doc) => out.documents.push(doc),
                Err(message) => {
                    warn!("{}: record {record}: {message}", file.display());
                    out.errors.push(RecordError {
                        path: file.clone(),
                        record,
                        message,
                    });
                }
            }
        }
    }
    out.documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(out)
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(path, e))?;
            collect_files(&entry.path(), out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Iterator over the `<DOC>` records of an SGML collection string.
pub struct TrecRecords<'a> {
    text: &'a str,
    upper: String,
    pos: usize,
}

impl<'a> TrecRecords<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            text,
            upper: text.to_ascii_uppercase(),
            pos: 0,
        }
    }
}

impl Iterator for TrecRecords<'_> {
    type Item = std::result::Result<RawDocument, String>;

    fn next(&mut self) -> Option<Self::Item> {
        let start = find_tag(&self.upper, "<DOC>", self.pos)?;
        let content_start = start + "<DOC>".len();
        let end = self.upper[content_start..]
            .find("</DOC>")
            .map(|i| content_start + i);
        let (content_end, next_pos) = match end {
            Some(e) => (e, e + "</DOC>".len()),
            None => {
                self.pos = self.text.len();
                return Some(Err("unterminated <DOC> record".into()));
            }
        };
        self.pos = next_pos;
        Some(parse_record(
            &self.text[content_start..content_end],
            &self.upper[content_start..content_end],
        ))
    }
}

/// Find `<DOC>` without matching `<DOCNO>` or `<DOCID>`.
fn find_tag(upper: &str, tag: &str, from: usize) -> Option<usize> {
    upper[from..].find(tag).map(|i| from + i)
}

fn parse_record(raw: &str, upper: &str) -> std::result::Result<RawDocument, String> {
    let doc_id = element_contents(raw, upper, "DOCNO")
        .into_iter()
        .next()
        .map(|s| strip_tags(s).trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| "record has no <DOCNO>".to_string())?;

    let title = TITLE_TAGS.iter().find_map(|tag| {
        let parts: Vec<String> = element_contents(raw, upper, tag)
            .into_iter()
            .map(clean_text)
            .filter(|s| !s.is_empty())
            .collect();
        (!parts.is_empty()).then(|| parts.join(" "))
    });

    let mut body_parts: Vec<String> = TEXT_TAGS
        .iter()
        .flat_map(|tag| element_contents(raw, upper, tag))
        .map(clean_text)
        .filter(|s| !s.is_empty())
        .collect();
    if body_parts.is_empty() && TEXT_TAGS.iter().all(|t| !upper.contains(&format!("<{t}"))) {
        // No text element at all: fall back to whatever is left outside the
        // id and title elements.
        let mut rest = raw.to_string();
        let mut rest_upper = upper.to_string();
        for tag in std::iter::once(&"DOCNO").chain(TITLE_TAGS) {
            (rest, rest_upper) = remove_elements(&rest, &rest_upper, tag);
        }
        let cleaned = clean_text(&rest);
        if !cleaned.is_empty() {
            body_parts.push(cleaned);
        }
    }

    Ok(RawDocument {
        doc_id,
        title,
        body: body_parts.join("\n"),
    })
}

/// Contents of every `<TAG ...>...</TAG>` element, in order.
fn element_contents<'a>(raw: &'a str, upper: &str, tag: &str) -> Vec<&'a str> {
    let open = format!("<{tag}");
    let close = format!("</{tag}>");
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(i) = upper[pos..].find(&open) {
        let at = pos + i;
        let after_name = at + open.len();
        // Require the tag name to end here (`<TEXT>` must not match `<TEXTX>`).
        match upper[after_name..].chars().next() {
            Some('>') | Some(' ') | Some('\t') | Some('\n') | Some('\r') => {}
            _ => {
                pos = after_name;
                continue;
            }
        }
        let Some(gt) = upper[after_name..].find('>') else {
            break;
        };
        let content_start = after_name + gt + 1;
        let Some(end) = upper[content_start..].find(&close) else {
            break;
        };
        out.push(&raw[content_start..content_start + end]);
        pos = content_start + end + close.len();
    }
    out
}

fn remove_elements(raw: &str, upper: &str, tag: &str) -> (String, String) {
    let open = format!("<{tag}");
    let close = format!("</{tag}>");
    let mut out = String::new();
    let mut out_upper = String::new();
    let mut pos = 0;
    while let Some(i) = upper[pos..].find(&open) {
        let at = pos + i;
        let Some(end) = upper[at..].find(&close) else {
            break;
        };
        out.push_str(&raw[pos..at]);
        out_upper.push_str(&upper[pos..at]);
        pos = at + end + close.len();
    }
    out.push_str(&raw[pos..]);
    out_upper.push_str(&upper[pos..]);
    (out, out_upper)
}

fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for ch in s.chars() {
        match ch {
            '<' => in_tag = true,
            '>' if in_tag => {
                in_tag = false;
                out.push(' ');
            }
            _ if !in_tag => out.push(ch),
            _ => {}
        }
    }
    out
}

fn decode_entities(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

fn encode_entities(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write documents as `<DOC>` records that [`parse_trec_collection`] reads back
/// unchanged, provided body lines carry no surrounding whitespace.
pub fn write_trec_collection<'a>(
    docs: impl IntoIterator<Item = &'a RawDocument>,
    w: &mut impl Write,
) -> std::io::Result<()> {
    for doc in docs {
        writeln!(w, "<DOC>\n<DOCNO> {} </DOCNO>", encode_entities(&doc.doc_id))?;
        if let Some(title) = &doc.title {
            writeln!(w, "<HEADLINE>\n{}\n</HEADLINE>", encode_entities(title))?;
        }
        writeln!(w, "<TEXT>\n{}\n</TEXT>\n</DOC>", encode_entities(&doc.body))?;
    }
    Ok(())
}

/// Topics in the plain `qid<TAB>query` line format.
pub fn write_topic_lines<'a>(topics: impl IntoIterator<Item = &'a Topic>, w: &mut impl Write) -> std::io::Result<()> {
    for t in topics {
        writeln!(w, "{}\t{}", t.query_id, t.title)?;
    }
    Ok(())
}

fn clean_text(s: &str) -> String {
    let stripped = strip_tags(s);
    let lines: Vec<&str> = stripped
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    decode_entities(&lines.join("\n"))
}

/// Parse a topics file.
///
/// Accepts the SGML `<top>` layout (`<num>`, `<title>`, `<desc>` fields, with or
/// without closing tags) and, when no `<top>` record is present, a plain
/// `qid<whitespace>query text` line format.
pub fn parse_topics(path: &Path) -> Result<Vec<Topic>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topics_str(&text, path)
}

pub fn parse_topics_str(text: &str, path: &Path) -> Result<Vec<Topic>> {
    let upper = text.to_ascii_uppercase();
    if !upper.contains("<TOP>") {
        return parse_topic_lines(text, path);
    }
    let mut topics = Vec::new();
    let mut pos = 0;
    while let Some(i) = upper[pos..].find("<TOP>") {
        let start = pos + i + "<TOP>".len();
        let end = upper[start..]
            .find("</TOP>")
            .map(|j| start + j)
            .unwrap_or(text.len());
        let raw = &text[start..end];
        let raw_upper = &upper[start..end];
        let line = text[..start].lines().count();
        let num = topic_field(raw, raw_upper, "NUM", &["Number:"]).ok_or_else(|| {
            Error::Format {
                path: path.to_path_buf(),
                line,
                message: "topic without <num>".into(),
            }
        })?;
        let title = topic_field(raw, raw_upper, "TITLE", &["Topic:"]).unwrap_or_default();
        let description =
            topic_field(raw, raw_upper, "DESC", &["Description:"]).unwrap_or_default();
        topics.push(Topic {
            query_id: num,
            title,
            description,
        });
        pos = (end + "</TOP>".len()).min(text.len());
    }
    Ok(topics)
}

fn topic_field(raw: &str, upper: &str, tag: &str, labels: &[&str]) -> Option<String> {
    let open = format!("<{tag}>");
    let at = upper.find(&open)? + open.len();
    let end = upper[at..].find('<').map(|i| at + i).unwrap_or(raw.len());
    let mut value = raw[at..end].trim();
    for label in labels {
        if value.len() >= label.len() && value[..label.len()].eq_ignore_ascii_case(label) {
            value = value[label.len()..].trim();
        }
    }
    let value = value.split_whitespace().collect::<Vec<_>>().join(" ");
    (!value.is_empty()).then_some(value)
}

fn parse_topic_lines(text: &str, path: &Path) -> Result<Vec<Topic>> {
    let mut topics = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (qid, title) = line
            .split_once(|c: char| c.is_whitespace())
            .ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                line: n + 1,
                message: "expected `qid query text`".into(),
            })?;
        topics.push(Topic {
            query_id: qid.to_string(),
            title: title.trim().to_string(),
            description: String::new(),
        });
    }
    Ok(topics)
}
