//! Argument parsing and dispatch. [`run`] returns the process exit status:
//! 0 on success, 1 on a runtime failure, 2 on a usage or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use exsearch_core::pipeline::SerpMode;
use log::{error, info};

use crate::commands::{self, EnginePaths};
use crate::config::Config;
use crate::error::CliError;
use crate::service::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "exsearch", version, about = "BM25 retrieval with DRMM re-ranking and explainable result pages")]
pub struct Cli {
    /// TOML configuration file. Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a document store and BM25 index from a TREC collection.
    Index {
        #[command(subcommand)]
        action: IndexCommand,
    },
    /// Write a BM25 run for a topics file.
    Retrieve(commands::RetrieveArgs),
    /// Train DRMM with 5-fold cross-validation.
    Train(commands::TrainArgs),
    /// Score a run against qrels.
    Evaluate(commands::EvaluateArgs),
    /// Answer one query and print the result page as JSON.
    Search(commands::SearchArgs),
    /// Run the JSON search service.
    Serve(ServeArgs),
    /// Generate a synthetic collection with planted relevance.
    Synth(commands::SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    Build(commands::IndexBuildArgs),
}

/// Each setting is resolved as flag, then `EXSEARCH_*` environment
/// variable, then config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ServeArgs {
    /// Listen address [env: EXSEARCH_ADDR].
    #[arg(long)]
    pub addr: Option<String>,
    /// Index directory [env: EXSEARCH_INDEX].
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Model file [env: EXSEARCH_MODEL].
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Embeddings file [env: EXSEARCH_EMBEDDINGS].
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Results per page [env: EXSEARCH_PAGE_SIZE].
    #[arg(long)]
    pub page_size: Option<usize>,
    /// Return document text from /api/doc [env: EXSEARCH_ALLOW_TEXT].
    #[arg(long)]
    pub allow_text: bool,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Runtime(err) => eprintln!("error: {err:#}"),
            }
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref())?;
    let stdout = std::io::stdout();
    match &cli.command {
        Command::Index {
            action: IndexCommand::Build(a),
        } => commands::index_build(&cfg, a),
        Command::Retrieve(a) => commands::retrieve(&cfg, a),
        Command::Train(a) => commands::train(&cfg, a),
        Command::Evaluate(a) => {
            let mut out = stdout.lock();
            commands::evaluate(&cfg, a, &mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::Search(a) => commands::search(&cfg, a, &mut stdout.lock()),
        Command::Serve(a) => serve(&cfg, a, &|k| std::env::var(k).ok()),
        Command::Synth(a) => commands::synth(a).map(|_| ()),
    }
}

/// Fully resolved `serve` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeSettings {
    pub addr: String,
    pub index: PathBuf,
    pub model: PathBuf,
    pub embeddings: PathBuf,
    pub page_size: usize,
    pub allow_text: bool,
}

pub fn resolve_serve(
    cfg: &Config,
    args: &ServeArgs,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<ServeSettings, CliError> {
    let pick_path = |flag: &Option<PathBuf>, var: &str, file: Option<PathBuf>, what: &str| {
        flag.clone()
            .or_else(|| env(var).map(PathBuf::from))
            .or(file)
            .ok_or_else(|| CliError::usage(format!("no {what} configured (flag, {var} or config)")))
    };
    let page_size = match (args.page_size, env("EXSEARCH_PAGE_SIZE")) {
        (Some(n), _) => n,
        (None, Some(v)) => v
            .parse()
            .map_err(|_| CliError::usage(format!("EXSEARCH_PAGE_SIZE `{v}` is not a number")))?,
        (None, None) => cfg.serve.page_size,
    };
    if page_size == 0 {
        return Err(CliError::usage("page size must be positive"));
    }
    let allow_text = args.allow_text
        || match env("EXSEARCH_ALLOW_TEXT") {
            Some(v) => matches!(v.to_ascii_lowercase().as_str(), "1" | "true" | "yes" | "on"),
            None => cfg.serve.allow_text,
        };
    Ok(ServeSettings {
        addr: args
            .addr
            .clone()
            .or_else(|| env("EXSEARCH_ADDR"))
            .unwrap_or_else(|| cfg.serve.addr.clone()),
        index: pick_path(&args.index, "EXSEARCH_INDEX", cfg.serve.index.clone(), "index")?,
        model: pick_path(&args.model, "EXSEARCH_MODEL", cfg.serve.model.clone(), "model")?,
        embeddings: pick_path(
            &args.embeddings,
            "EXSEARCH_EMBEDDINGS",
            cfg.embeddings.path.clone(),
            "embeddings",
        )?,
        page_size,
        allow_text,
    })
}

fn serve(cfg: &Config, args: &ServeArgs, env: &dyn Fn(&str) -> Option<String>) -> Result<(), CliError> {
    let s = resolve_serve(cfg, args, env)?;
    // Configured but unusable artifacts are startup failures, not usage errors.
    let paths = EnginePaths {
        index: s.index.clone(),
        model: s.model.clone(),
        embeddings: s.embeddings.clone(),
    };
    let engine = commands::load_engine(cfg, &paths, s.page_size).map_err(|e| match e {
        CliError::Usage(msg) => CliError::runtime(msg),
        other => other,
    })?;
    let version = commands::artifact_version(&[&s.model, &s.index.join(commands::STORE_FILE)])?;
    let state = Arc::new(AppState {
        engine,
        default_mode: cfg.serve.default_mode,
        allow_text: s.allow_text,
        artifact_version: version.clone(),
    });
    let cors = service::cors_layer(cfg.serve.cors_origin.as_deref())
        .map_err(|e| CliError::usage(format!("serve.cors_origin: {e}")))?;
    let app = service::router(state, cors);

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&s.addr)
            .await
            .map_err(|e| CliError::runtime(format!("cannot listen on {}: {e}", s.addr)))?;
        let local = listener.local_addr()?;
        eprintln!("listening on http://{local}");
        info!("serving artifacts {version} (default mode {})", SerpMode::default());
        service::serve(listener, app, service::shutdown_signal()).await?;
        Ok::<_, CliError>(())
    })
    .inspect_err(|e| error!("{e}"))
}
