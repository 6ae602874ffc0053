//! On-disk cache of per-query matching histograms.
//!
//! Embeddings are frozen during training, so the histograms of a
//! `(query, unit)` pair never change. Entries are written to a temporary file
//! and renamed into place, so concurrent writers never expose a partial entry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::features::{GatingInput, Granularity, QueryFeatures, QueryTerms};
use super::histogram::HistogramConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

#[derive(Serialize)]
struct KeyParts<'a> {
    context: &'a str,
    query_id: &'a str,
    tokens: &'a [String],
    surfaces: &'a [String],
    candidates: &'a [String],
    granularity: Granularity,
    histogram: &'a HistogramConfig,
    gating: GatingInput,
}

/// Cache key for the features of one query. `context` should identify the
/// document store and embeddings, e.g. a hash of their files.
pub fn feature_key(
    context: &str,
    query: &QueryTerms,
    candidates: &[String],
    granularity: Granularity,
    histogram: &HistogramConfig,
    gating: GatingInput,
) -> String {
    let parts = KeyParts {
        context,
        query_id: &query.query_id,
        tokens: &query.tokens.tokens,
        surfaces: &query.tokens.surfaces,
        candidates,
        granularity,
        histogram,
        gating,
    };
    let json = serde_json::to_vec(&parts).expect("key parts serialize");
    format!("{:x}", Sha256::digest(json))
}

impl FeatureCache {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A missing entry is `None`; so is an unreadable one, after a warning.
    pub fn get(&self, key: &str) -> Option<QueryFeatures> {
        let path = self.entry_path(key);
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(f) => Some(f),
            Err(e) => {
                warn!("ignoring corrupt cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn put(&self, key: &str, features: &QueryFeatures) -> Result<()> {
        let path = self.entry_path(key);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        serde_json::to_writer(&mut tmp, features)?;
        tmp.flush().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    pub fn get_or_compute(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<QueryFeatures>,
    ) -> Result<QueryFeatures> {
        if let Some(f) = self.get(key) {
            return Ok(f);
        }
        let f = compute()?;
        self.put(key, &f)?;
        Ok(f)
    }
}
