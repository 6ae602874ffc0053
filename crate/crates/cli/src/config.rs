//! The TOML configuration file. Every section is optional; command-line
//! flags override whatever the file sets.

use std::fs;
use std::path::{Path, PathBuf};

use exsearch_core::corpus::{AnalyzerConfig, DEFAULT_PASSAGE_LEN};
use exsearch_core::drmm::{GatingInput, Granularity, HistogramConfig, TrainConfig};
use exsearch_core::index::RetrievalConfig;
use exsearch_core::pipeline::{SerpMode, DEFAULT_PAGE_SIZE};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub analyzer: AnalyzerConfig,
    pub index: IndexSection,
    pub retrieval: RetrievalSection,
    pub embeddings: EmbeddingsSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub evaluate: EvaluateSection,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexSection {
    /// Index passages rather than whole documents.
    pub passages: bool,
    pub passage_len: usize,
}

impl Default for IndexSection {
    fn default() -> Self {
        Self {
            passages: false,
            passage_len: DEFAULT_PASSAGE_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub k1: f64,
    pub b: f64,
    /// Defaults to 100 for passage indexes and 1000 for document indexes.
    pub depth: Option<usize>,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        let r = RetrievalConfig::default();
        Self {
            k1: r.k1,
            b: r.b,
            depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingsSection {
    pub path: Option<PathBuf>,
    /// Inferred from the first line of the file when unset.
    pub dim: Option<usize>,
    pub oov_seed: u64,
}

impl Default for EmbeddingsSection {
    fn default() -> Self {
        Self {
            path: None,
            dim: None,
            oov_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub histogram: HistogramConfig,
    pub gating: GatingInput,
    pub granularity: Granularity,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            histogram: HistogramConfig::default(),
            gating: GatingInput::Embedding,
            granularity: Granularity::Passage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub cutoff: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { cutoff: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub addr: String,
    pub index: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub page_size: usize,
    pub default_mode: SerpMode,
    /// Include full document text in `/api/doc` responses.
    pub allow_text: bool,
    /// Allowed CORS origin; `*` when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8080".into(),
            index: None,
            model: None,
            page_size: DEFAULT_PAGE_SIZE,
            default_mode: SerpMode::Explainable,
            allow_text: false,
            cors_origin: None,
        }
    }
}

impl Config {
    /// Read `path`, or return the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn retrieval(&self, passages: bool) -> RetrievalConfig {
        RetrievalConfig {
            k1: self.retrieval.k1,
            b: self.retrieval.b,
            depth: self
                .retrieval
                .depth
                .unwrap_or(if passages { 100 } else { 1000 }),
        }
    }
}
