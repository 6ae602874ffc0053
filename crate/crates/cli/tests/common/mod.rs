#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use exsearch_core::corpus::{Analyzer, AnalyzerConfig, DocumentStore};
use exsearch_core::drmm::{initial_params, DrmmModel, GatingInput, HistogramConfig, ModelSpec, TrainConfig};
use exsearch_core::index::{Index, UnitKind};
use exsearch_core::pipeline::{EngineConfig, SearchEngine};
use exsearch_core::synthetic::{planted_collection, PlantedCollection, PlantedConfig};

pub const BIN: &str = env!("CARGO_BIN_EXE_exsearch");

pub fn exsearch(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn exsearch")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit status")
}

/// An untrained engine over the default planted collection.
pub fn engine(page_size: usize) -> (SearchEngine, PlantedCollection) {
    let c = planted_collection(&PlantedConfig::default());
    let analyzer = Analyzer::from_config(&AnalyzerConfig::default()).unwrap();
    let store = DocumentStore::build(c.docs.clone(), analyzer, 100).unwrap();
    let index = Index::build(store.passage_units(), UnitKind::Passage).unwrap();
    let spec = ModelSpec {
        histogram: HistogramConfig::default(),
        gating_input: GatingInput::Embedding,
        gating_dim: c.embeddings.dim(),
    };
    let model = DrmmModel {
        histogram: spec.histogram,
        gating_input: spec.gating_input,
        gating_dim: spec.gating_dim,
        params: initial_params(spec, &TrainConfig::default()),
    };
    let cfg = EngineConfig {
        page_size,
        ..EngineConfig::default()
    };
    let engine = SearchEngine::new(store, index, c.embeddings.clone(), model, cfg).unwrap();
    (engine, c)
}
