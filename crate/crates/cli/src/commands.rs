//! The batch subcommands. Each writes its artifacts plus a `manifest.json`
//! describing inputs, outputs, configuration and seeds.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use exsearch_core::corpus::{
    parse_topics, parse_trec_collection, write_topic_lines, write_trec_collection, Analyzer,
    DocumentStore,
};
use exsearch_core::crossval::{cross_validate, CrossValidation};
use exsearch_core::drmm::{
    filter_qrels, retrieved_sets, DrmmModel, FeatureCache, FeatureExtractor, GatingInput,
    Granularity, ModelSpec,
};
use exsearch_core::embeddings::EmbeddingStore;
use exsearch_core::eval::{evaluate_run, make_folds, validate_folds, EvalReport, Qrels, Run};
use exsearch_core::index::{Index, UnitKind};
use exsearch_core::pipeline::{topic_features, EngineConfig, SearchEngine, SerpMode};
use exsearch_core::synthetic::{planted_collection, PlantedConfig};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{require_path, CliError};
use crate::manifest::{digest, RunManifest};

pub const STORE_FILE: &str = "store.jsonl";
pub const INDEX_FILE: &str = "index.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Args)]
pub struct IndexBuildArgs {
    /// TREC collection file or directory.
    #[arg(long)]
    pub collection: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Index fixed-length passages instead of whole documents.
    #[arg(long)]
    pub passages: bool,
    #[arg(long)]
    pub passage_len: Option<usize>,
}

pub fn index_build(cfg: &Config, args: &IndexBuildArgs) -> CliResult {
    require_path(&args.collection, "collection")?;
    let mut cfg = cfg.clone();
    cfg.index.passages |= args.passages;
    if let Some(n) = args.passage_len {
        cfg.index.passage_len = n;
    }
    let mut manifest = RunManifest::new("index build", &(&cfg.analyzer, &cfg.index))?;
    let analyzer = Analyzer::from_config(&cfg.analyzer)?;
    let parsed = parse_trec_collection(&args.collection)?;
    if !parsed.errors.is_empty() {
        warn!("{} malformed records skipped", parsed.errors.len());
    }
    if parsed.documents.is_empty() {
        return Err(CliError::runtime(format!(
            "no documents found in {}",
            args.collection.display()
        )));
    }
    let store = DocumentStore::build(parsed.documents, analyzer, cfg.index.passage_len)?;
    let (units, kind) = if cfg.index.passages {
        (store.passage_units(), UnitKind::Passage)
    } else {
        (store.document_units(), UnitKind::Document)
    };
    let index = Index::build(units, kind)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let store_path = args.out.join(STORE_FILE);
    let index_path = args.out.join(INDEX_FILE);
    store.save(&store_path)?;
    index.save(&index_path)?;
    manifest.input("collection", &args.collection)?;
    manifest.output("store", &store_path)?;
    manifest.output("index", &index_path)?;
    manifest.finish(&args.out.join(MANIFEST_FILE))?;
    info!(
        "indexed {} documents as {} {kind} units into {}",
        store.len(),
        index.num_units(),
        args.out.display()
    );
    Ok(())
}

/// The document store and index in an `index build` output directory.
pub fn load_index(dir: &Path) -> CliResult<(DocumentStore, Index)> {
    require_path(dir, "index directory")?;
    let store_path = dir.join(STORE_FILE);
    let index_path = dir.join(INDEX_FILE);
    require_path(&store_path, "document store")?;
    require_path(&index_path, "index")?;
    Ok((DocumentStore::load(&store_path)?, Index::load(&index_path)?))
}

#[derive(Debug, Clone, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    /// Output run file; its manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Documents per query. Defaults to 100 on passage indexes, 1000 otherwise.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, default_value = "bm25")]
    pub tag: String,
}

pub fn retrieve(cfg: &Config, args: &RetrieveArgs) -> CliResult {
    require_path(&args.topics, "topics file")?;
    let (store, index) = load_index(&args.index)?;
    let topics = parse_topics(&args.topics)?;
    let mut retrieval = cfg.retrieval(index.kind() == UnitKind::Passage);
    if let Some(d) = args.depth {
        retrieval.depth = d;
    }
    retrieval.validate()?;
    let mut manifest = RunManifest::new("retrieve", &retrieval)?;

    let mut run = Run::new(args.tag.clone());
    for t in &topics {
        let query = store.analyzer().tokenize(&t.title).tokens;
        if query.is_empty() {
            warn!("topic {}: no terms left after preprocessing; skipped", t.query_id);
            continue;
        }
        run.set_ranking(&t.query_id, index.retrieve_documents(&retrieval, &query));
    }
    write_parent(&args.out)?;
    run.save(&args.out)?;
    manifest.input("index", &args.index)?;
    manifest.input("topics", &args.topics)?;
    manifest.output("run", &args.out)?;
    manifest.finish(&sibling(&args.out, ".manifest.json"))?;
    info!("retrieved {} topics into {}", run.num_queries(), args.out.display());
    Ok(())
}

/// Embeddings from `path`, with the dimension taken from the configuration
/// or else from the first line of the file.
pub fn load_embeddings(cfg: &Config, path: &Path) -> CliResult<EmbeddingStore> {
    require_path(path, "embeddings file")?;
    let dim = match cfg.embeddings.dim {
        Some(d) => d,
        None => infer_dim(path)?,
    };
    let store = EmbeddingStore::load(path, dim, cfg.embeddings.oov_seed)?;
    if store.skipped_lines() > 0 {
        warn!("{}: {} malformed lines skipped", path.display(), store.skipped_lines());
    }
    Ok(store)
}

fn infer_dim(path: &Path) -> CliResult<usize> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    for line in BufReader::new(file).lines() {
        let fields = line.with_context(|| format!("reading {}", path.display()))?;
        let n = fields.split_whitespace().count();
        if n > 1 {
            return Ok(n - 1);
        }
    }
    Err(CliError::runtime(format!("no vectors in {}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GranularityArg {
    Document,
    Passage,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Document => Granularity::Document,
            GranularityArg::Passage => Granularity::Passage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GatingArg {
    Embedding,
    Idf,
}

impl From<GatingArg> for GatingInput {
    fn from(g: GatingArg) -> Self {
        match g {
            GatingArg::Embedding => GatingInput::Embedding,
            GatingArg::Idf => GatingInput::Idf,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Candidate run to re-rank, usually the output of `retrieve`.
    #[arg(long)]
    pub run: PathBuf,
    /// GloVe-format vectors. Falls back to `embeddings.path` in the config.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON array of 5 disjoint arrays of query ids. Defaults to sorted ids
    /// dealt round-robin.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub granularity: Option<GranularityArg>,
    #[arg(long, value_enum)]
    pub gating: Option<GatingArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Directory for cached query features, reused across runs.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long, default_value = "drmm")]
    pub tag: String,
}

#[derive(Serialize)]
struct TrainSnapshot<'a> {
    analyzer: &'a exsearch_core::corpus::AnalyzerConfig,
    embeddings: &'a crate::config::EmbeddingsSection,
    model: &'a crate::config::ModelSection,
    train: &'a exsearch_core::drmm::TrainConfig,
    cutoff: usize,
}

pub fn read_folds(path: &Path) -> CliResult<Vec<Vec<String>>> {
    require_path(path, "folds file")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let folds: Vec<Vec<String>> = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid folds file {}: {e}", path.display())))?;
    validate_folds(&folds, None)?;
    Ok(folds)
}

pub fn train(cfg: &Config, args: &TrainArgs) -> CliResult {
    let mut cfg = cfg.clone();
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(g) = args.granularity {
        cfg.model.granularity = g.into();
    }
    if let Some(g) = args.gating {
        cfg.model.gating = g.into();
    }
    if let Some(e) = args.epochs {
        cfg.train.max_epochs = e;
    }
    if let Some(p) = args.patience {
        cfg.train.patience = p;
    }
    cfg.train.validate()?;
    cfg.model.histogram.validate()?;
    let embeddings_path = args
        .embeddings
        .clone()
        .or_else(|| cfg.embeddings.path.clone())
        .ok_or_else(|| CliError::usage("no embeddings given (--embeddings or embeddings.path)"))?;
    for (p, what) in [
        (&args.topics, "topics file"),
        (&args.qrels, "qrels file"),
        (&args.run, "run file"),
    ] {
        require_path(p, what)?;
    }
    let user_folds = args.folds.as_deref().map(read_folds).transpose()?;

    let (store, index) = load_index(&args.index)?;
    let embeddings = load_embeddings(&cfg, &embeddings_path)?;
    let topics = parse_topics(&args.topics)?;
    let qrels = Qrels::load(&args.qrels)?;
    let candidates = Run::load(&args.run)?;

    let mut manifest = RunManifest::new(
        "train",
        &TrainSnapshot {
            analyzer: &cfg.analyzer,
            embeddings: &cfg.embeddings,
            model: &cfg.model,
            train: &cfg.train,
            cutoff: cfg.evaluate.cutoff,
        },
    )?;
    manifest.seed("train", cfg.train.seed);
    manifest.seed("oov", cfg.embeddings.oov_seed);
    manifest.input("index", &args.index)?;
    manifest.input("embeddings", &embeddings_path)?;
    manifest.input("topics", &args.topics)?;
    manifest.input("qrels", &args.qrels)?;
    manifest.input("run", &args.run)?;
    if let Some(f) = &args.folds {
        manifest.input("folds", f)?;
    }

    let extractor = FeatureExtractor {
        store: &store,
        embeddings: &embeddings,
        index: Some(&index),
        histogram: cfg.model.histogram,
        gating: cfg.model.gating,
    };
    let cache = args.cache.as_deref().map(FeatureCache::open).transpose()?;
    let context = format!(
        "{}:{}:{}",
        manifest.inputs["index"].sha256,
        manifest.inputs["embeddings"].sha256,
        cfg.embeddings.oov_seed
    );
    let features = topic_features(
        &extractor,
        &topics,
        &candidates,
        cfg.model.granularity,
        cache.as_ref().map(|c| (c, context.as_str())),
    )?;
    let folds = match user_folds {
        Some(f) => f,
        None => {
            let ids: Vec<&str> = features.iter().map(|f| f.query_id.as_str()).collect();
            make_folds(&ids)?
        }
    };
    let filtered = filter_qrels(&qrels, &retrieved_sets(&candidates));
    let spec = ModelSpec {
        histogram: cfg.model.histogram,
        gating_input: cfg.model.gating,
        gating_dim: extractor.gating_dim(),
    };
    let cv = cross_validate(&features, &filtered, &folds, spec, &cfg.train, &args.tag)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_cv_outputs(&cv, &folds, &qrels, cfg.evaluate.cutoff, &args.out, &mut manifest)?;
    manifest.finish(&args.out.join(MANIFEST_FILE))?;
    Ok(())
}

/// Index of the fold whose model scored best on its validation queries;
/// the first one wins ties.
pub fn best_fold(cv: &CrossValidation) -> usize {
    let mut best = 0;
    for (i, f) in cv.folds.iter().enumerate() {
        if f.outcome.log.best_val_map > cv.folds[best].outcome.log.best_val_map {
            best = i;
        }
    }
    best
}

fn write_cv_outputs(
    cv: &CrossValidation,
    folds: &[Vec<String>],
    qrels: &Qrels,
    cutoff: usize,
    out: &Path,
    manifest: &mut RunManifest,
) -> CliResult {
    let folds_path = out.join("folds.json");
    fs::write(&folds_path, serde_json::to_string_pretty(folds).map_err(anyhow::Error::from)? + "\n")?;
    manifest.output("folds", &folds_path)?;
    for f in &cv.folds {
        let dir = out.join(format!("fold-{}", f.fold));
        fs::create_dir_all(&dir)?;
        let model = dir.join("model.json");
        f.outcome.model.save(&model)?;
        let log = dir.join("training.jsonl");
        let mut w = std::io::BufWriter::new(fs::File::create(&log)?);
        f.outcome.log.write_jsonl(&mut w)?;
        w.flush()?;
        let test_run = dir.join("test-run.txt");
        f.test_run.save(&test_run)?;
        manifest.output(&format!("fold-{}/model", f.fold), &model)?;
        manifest.output(&format!("fold-{}/training", f.fold), &log)?;
        manifest.output(&format!("fold-{}/test-run", f.fold), &test_run)?;
        info!(
            "fold {}: best epoch {} with validation MAP {:.4}",
            f.fold, f.outcome.log.best_epoch, f.outcome.log.best_val_map
        );
    }
    let best = best_fold(cv);
    let model_path = out.join("model.json");
    cv.folds[best].outcome.model.save(&model_path)?;
    manifest.output("model", &model_path)?;

    let run_path = out.join("run.txt");
    cv.run.save(&run_path)?;
    manifest.output("run", &run_path)?;
    let untrained_path = out.join("untrained-run.txt");
    cv.untrained_run.save(&untrained_path)?;
    manifest.output("untrained_run", &untrained_path)?;

    let trained = evaluate_run(&cv.run, qrels, cutoff);
    let untrained = evaluate_run(&cv.untrained_run, qrels, cutoff);
    let report_path = out.join("report.txt");
    let mut report = String::new();
    report.push_str(&format!("# held-out test queries, model.json is fold {best}\n"));
    report.push_str(&format!("## {}\n{trained}\n", cv.run.tag));
    report.push_str(&format!("## {}\n{untrained}\n", cv.untrained_run.tag));
    report.push_str(&format!("## machine-readable ({})\n", cv.run.tag));
    for line in trained.machine_lines() {
        report.push_str(&line);
        report.push('\n');
    }
    fs::write(&report_path, &report)?;
    manifest.output("report", &report_path)?;
    info!(
        "held-out MAP {:.4} (untrained {:.4}); artifacts in {}",
        trained.map,
        untrained.map,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    /// Human-readable table.
    Table,
    /// `metric<TAB>query<TAB>value` lines.
    Trec,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Cutoff k for P@k and nDCG@k.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
}

pub fn evaluate(cfg: &Config, args: &EvaluateArgs, out: &mut dyn Write) -> CliResult<EvalReport> {
    require_path(&args.run, "run file")?;
    require_path(&args.qrels, "qrels file")?;
    let k = args.cutoff.unwrap_or(cfg.evaluate.cutoff);
    if k == 0 {
        return Err(CliError::usage("cutoff must be positive"));
    }
    let run = Run::load(&args.run)?;
    let qrels = Qrels::load(&args.qrels)?;
    let report = evaluate_run(&run, &qrels, k);
    match args.format {
        ReportFormat::Table => write!(out, "{report}")?,
        ReportFormat::Trec => {
            for line in report.machine_lines() {
                writeln!(out, "{line}")?;
            }
        }
        ReportFormat::Json => {
            writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?)?
        }
    }
    Ok(report)
}

/// Artifact locations shared by `search` and `serve`.
#[derive(Debug, Clone)]
pub struct EnginePaths {
    pub index: PathBuf,
    pub model: PathBuf,
    pub embeddings: PathBuf,
}

pub fn load_engine(cfg: &Config, paths: &EnginePaths, page_size: usize) -> CliResult<SearchEngine> {
    require_path(&paths.model, "model file")?;
    let (store, index) = load_index(&paths.index)?;
    let model = DrmmModel::load(&paths.model)?;
    let embeddings = load_embeddings(cfg, &paths.embeddings)?;
    let engine_cfg = EngineConfig {
        granularity: cfg.model.granularity,
        k1: cfg.retrieval.k1,
        b: cfg.retrieval.b,
        depth: cfg.retrieval.depth,
        page_size,
    };
    Ok(SearchEngine::new(store, index, embeddings, model, engine_cfg)?)
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// `regular` or `explainable`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub page_size: Option<usize>,
    pub query: String,
}

/// Print one result page as JSON.
pub fn search(cfg: &Config, args: &SearchArgs, out: &mut dyn Write) -> CliResult {
    let embeddings = args
        .embeddings
        .clone()
        .or_else(|| cfg.embeddings.path.clone())
        .ok_or_else(|| CliError::usage("no embeddings given (--embeddings or embeddings.path)"))?;
    let mode = match &args.mode {
        Some(m) => m.parse::<SerpMode>()?,
        None => cfg.serve.default_mode,
    };
    let paths = EnginePaths {
        index: args.index.clone(),
        model: args.model.clone(),
        embeddings,
    };
    let engine = load_engine(cfg, &paths, args.page_size.unwrap_or(cfg.serve.page_size))?;
    let payload = engine.serp(&args.query, mode).map_err(|e| match e {
        exsearch_core::Error::UnanswerableQuery => CliError::usage(e.to_string()),
        other => other.into(),
    })?;
    writeln!(out, "{}", serde_json::to_string_pretty(&payload).map_err(anyhow::Error::from)?)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub queries: usize,
}

/// Files written by `synth`.
pub struct SynthFiles {
    pub collection: PathBuf,
    pub topics: PathBuf,
    pub qrels: PathBuf,
    pub embeddings: PathBuf,
}

impl SynthFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            collection: dir.join("collection.trec"),
            topics: dir.join("topics.txt"),
            qrels: dir.join("qrels.txt"),
            embeddings: dir.join("embeddings.txt"),
        }
    }
}

/// Write a planted collection with topics, qrels and embeddings.
pub fn synth(args: &SynthArgs) -> CliResult<SynthFiles> {
    if args.queries == 0 {
        return Err(CliError::usage("--queries must be positive"));
    }
    let pc = PlantedConfig {
        num_queries: args.queries,
        seed: args.seed,
        ..PlantedConfig::default()
    };
    let c = planted_collection(&pc);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let files = SynthFiles::in_dir(&args.out);
    let mut w = std::io::BufWriter::new(fs::File::create(&files.collection)?);
    write_trec_collection(&c.docs, &mut w)?;
    w.flush()?;
    let mut w = std::io::BufWriter::new(fs::File::create(&files.topics)?);
    write_topic_lines(&c.topics, &mut w)?;
    w.flush()?;
    c.qrels.save(&files.qrels)?;
    c.embeddings.save_glove(&files.embeddings)?;

    let mut manifest = RunManifest::new("synth", &serde_json::json!({"queries": args.queries}))?;
    manifest.seed("data", args.seed);
    for (name, p) in [
        ("collection", &files.collection),
        ("topics", &files.topics),
        ("qrels", &files.qrels),
        ("embeddings", &files.embeddings),
    ] {
        manifest.output(name, p)?;
    }
    manifest.finish(&args.out.join(MANIFEST_FILE))?;
    info!(
        "wrote {} documents and {} topics to {}",
        c.docs.len(),
        c.topics.len(),
        args.out.display()
    );
    Ok(files)
}

fn write_parent(path: &Path) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Hash of an artifact, for `x-artifact-version`.
pub fn artifact_version(paths: &[&Path]) -> anyhow::Result<String> {
    let mut parts = Vec::new();
    for p in paths {
        parts.push(digest(p)?.sha256);
    }
    let h = Sha256::digest(parts.join(":"));
    Ok(format!("{:x}", h)[..16].to_string())
}
