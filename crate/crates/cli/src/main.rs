use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use litscope::analysis::{AnalysisSettings, Workspace};
use litscope::api::{self, AppState};
use litscope::briefcase::{BriefcaseStore, DEFAULT_NAMESPACE};
use litscope::corpus::{CorpusFormat, CorpusStore, DocFilter};
use litscope::fixtures;
use litscope::pico::{self, conll, SequenceModel, TrainConfig};
use litscope::relations::SankeyOptions;
use litscope::topics::{self, LdaConfig, TopicModel, DEFAULT_ITERATIONS, DEFAULT_TOP_N, DEFAULT_WINDOW};
use litscope::vocab::{StopList, Vocabulary};
use tracing_subscriber::EnvFilter;

const PICO_MODEL_FILE: &str = "pico.tsv";
const VOCABULARY_FILE: &str = "vocabulary.tsv";
const STOPWORDS_FILE: &str = "stopwords.txt";
const BRIEFCASE_DIR: &str = "briefcases";

/// Literature exploration over a local corpus: search, briefcases, PICO
/// relations, topics and concept clouds.
#[derive(Debug, Parser)]
#[command(name = "litscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest a JSONL or CSV metadata file into the corpus store.
    Ingest {
        file: PathBuf,
        #[arg(long, default_value = "corpus")]
        corpus_dir: PathBuf,
        /// jsonl or csv; guessed from the extension when omitted.
        #[arg(long)]
        format: Option<CorpusFormat>,
    },
    /// Train the PICO sequence labeler on CoNLL data.
    TrainPico {
        /// A .conll file, or a directory holding train.conll.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = PICO_MODEL_FILE)]
        out: PathBuf,
    },
    /// Token-level precision, recall and F1 of a PICO model on CoNLL data.
    EvalPico {
        #[arg(long)]
        model: PathBuf,
        /// A .conll file, or a directory holding test.conll.
        #[arg(long)]
        data: PathBuf,
    },
    /// Train the global topic model, choosing K by coherence.
    TrainLda {
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        k_grid: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        /// Exclude concepts among this many most document-frequent.
        #[arg(long, default_value_t = AnalysisSettings::default().top_frequent)]
        top_frequent: usize,
    },
    /// BM25 search over titles and abstracts; prints hits as JSON.
    Search {
        query: String,
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Print the Sankey graph of a document collection as JSON.
    Sankey {
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[command(flatten)]
        collection: CollectionArgs,
        #[arg(long, default_value_t = SankeyOptions::default().min_strength)]
        min_strength: usize,
        #[arg(long, default_value_t = SankeyOptions::default().max_nodes_per_column)]
        max_nodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manage briefcases offline.
    Briefcase {
        #[command(subcommand)]
        action: BriefcaseAction,
        #[command(flatten)]
        store: BriefcaseArgs,
    },
    /// Export a briefcase version with document metadata as JSON.
    Export {
        briefcase: String,
        #[arg(long)]
        version: Option<u64>,
        #[command(flatten)]
        store: BriefcaseArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the JSON API.
    Serve {
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Defaults to <corpus-dir>/briefcases.
        #[arg(long)]
        briefcase_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum BriefcaseAction {
    List,
    Create { name: String },
    Add { briefcase: String, doc_ids: Vec<String> },
    Remove { briefcase: String, doc_ids: Vec<String> },
}

#[derive(Debug, Args)]
struct WorkspaceArgs {
    #[arg(long, default_value = "corpus")]
    corpus_dir: PathBuf,
    /// Holds pico.tsv, lda.json and analysis.json.
    #[arg(long, default_value = "models")]
    model_dir: PathBuf,
    /// Concept vocabulary TSV; defaults to <corpus-dir>/vocabulary.tsv, then the bundled one.
    #[arg(long)]
    vocabulary: Option<PathBuf>,
    /// Stopword list; defaults to <corpus-dir>/stopwords.txt, then the bundled one.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long, default_value_t = litscope::search::DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long)]
    year_from: Option<i32>,
    #[arg(long)]
    year_to: Option<i32>,
    #[arg(long, value_delimiter = ',')]
    source: Vec<String>,
}

impl FilterArgs {
    fn filter(&self) -> DocFilter {
        let mut filter = DocFilter::default();
        if self.year_from.is_some() || self.year_to.is_some() {
            filter = filter.years(self.year_from.unwrap_or(i32::MIN), self.year_to.unwrap_or(i32::MAX));
        }
        if !self.source.is_empty() {
            filter = filter.sources(self.source.iter().cloned());
        }
        filter
    }
}

#[derive(Debug, Args)]
struct CollectionArgs {
    /// Comma-separated document ids.
    #[arg(long, value_delimiter = ',')]
    docs: Vec<String>,
    /// Use the hits of this query.
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    briefcase: Option<String>,
    #[arg(long)]
    version: Option<u64>,
    #[arg(long, default_value = DEFAULT_NAMESPACE)]
    namespace: String,
    #[arg(long)]
    briefcase_dir: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Debug, Args)]
struct BriefcaseArgs {
    #[arg(long, default_value = "corpus")]
    corpus_dir: PathBuf,
    /// Defaults to <corpus-dir>/briefcases.
    #[arg(long)]
    briefcase_dir: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_NAMESPACE)]
    namespace: String,
}

impl BriefcaseArgs {
    fn open(&self) -> Result<BriefcaseStore> {
        open_briefcases(&self.corpus_dir, self.briefcase_dir.as_deref())
    }
}

fn open_briefcases(corpus_dir: &Path, dir: Option<&Path>) -> Result<BriefcaseStore> {
    let dir = dir.map_or_else(|| corpus_dir.join(BRIEFCASE_DIR), Path::to_path_buf);
    BriefcaseStore::open(&dir).with_context(|| format!("opening briefcases in {}", dir.display()))
}

fn open_corpus(dir: &Path) -> Result<CorpusStore> {
    let store = CorpusStore::open(dir).with_context(|| format!("opening corpus {}", dir.display()))?;
    if store.is_empty() {
        bail!("corpus {} is empty; run `litscope ingest` first", dir.display());
    }
    Ok(store)
}

impl WorkspaceArgs {
    fn vocabulary(&self) -> Result<Vocabulary> {
        match self.resource(&self.vocabulary, VOCABULARY_FILE) {
            Some(path) => Vocabulary::load(&path).with_context(|| format!("loading {}", path.display())),
            None => Ok(fixtures::vocabulary()),
        }
    }

    fn stoplist(&self) -> Result<StopList> {
        match self.resource(&self.stopwords, STOPWORDS_FILE) {
            Some(path) => StopList::load(&path).with_context(|| format!("loading {}", path.display())),
            None => Ok(fixtures::stoplist()),
        }
    }

    fn resource(&self, flag: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        flag.clone().or_else(|| {
            let path = self.corpus_dir.join(name);
            path.exists().then_some(path)
        })
    }

    /// The saved model, or one trained on the bundled annotations.
    fn pico_model(&self) -> Result<SequenceModel> {
        let path = self.model_dir.join(PICO_MODEL_FILE);
        if path.exists() {
            return SequenceModel::load(&path).with_context(|| format!("loading {}", path.display()));
        }
        tracing::info!("no {} in {}; training on bundled annotations", PICO_MODEL_FILE, self.model_dir.display());
        Ok(pico::train(&fixtures::pico_train(), &TrainConfig::default())?)
    }

    fn workspace(&self, pico_model: SequenceModel, settings: AnalysisSettings) -> Result<Workspace> {
        let corpus = open_corpus(&self.corpus_dir)?;
        Ok(Workspace::new(corpus, self.vocabulary()?, self.stoplist()?, pico_model, settings)?)
    }

    /// Workspace with the PICO model and, when trained, the topic model.
    fn full_workspace(&self) -> Result<Workspace> {
        let settings = AnalysisSettings::load_or_default(&self.model_dir)?;
        let ws = self.workspace(self.pico_model()?, settings)?;
        let lda = self.model_dir.join(topics::MODEL_FILE);
        if !lda.exists() {
            tracing::warn!("no {} in {}; topic views disabled", topics::MODEL_FILE, self.model_dir.display());
            return Ok(ws);
        }
        let model = TopicModel::load(&lda).with_context(|| format!("loading {}", lda.display()))?;
        Ok(ws.with_topic_model(model))
    }
}

fn write_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    run(Cli::parse().command)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { file, corpus_dir, format } => {
            let format = match format {
                Some(f) => f,
                None => CorpusFormat::from_path(&file)
                    .with_context(|| format!("cannot tell the format of {}; pass --format", file.display()))?,
            };
            let mut store = CorpusStore::open(&corpus_dir)?;
            let report = store.ingest(&file, format)?;
            store.persist()?;
            write_json(&serde_json::json!({ "report": report, "documents": store.len() }), None)
        }
        Command::TrainPico { data, epochs, seed, out } => {
            let sequences = conll::read_split(&data, "train")?;
            if sequences.is_empty() {
                bail!("no sequences in {}", data.display());
            }
            let config = TrainConfig { epochs, seed, ..TrainConfig::default() };
            let model = pico::train(&sequences, &config)?;
            model.save(&out)?;
            write_json(
                &serde_json::json!({
                    "sequences": sequences.len(),
                    "features": model.num_features(),
                    "out": out,
                }),
                None,
            )
        }
        Command::EvalPico { model, data } => {
            let model = SequenceModel::load(&model)?;
            let sequences = conll::read_split(&data, "test")?;
            let gold: Vec<_> = sequences.iter().map(|s| s.labels.clone()).collect();
            let predicted: Vec<_> = sequences.iter().map(|s| model.decode(&s.tokens)).collect();
            write_json(&pico::evaluate(&gold, &predicted)?, None)
        }
        Command::TrainLda { ws, k_grid, seed, iterations, top_frequent } => {
            let settings = AnalysisSettings { top_frequent, ..AnalysisSettings::default() };
            let workspace = ws.workspace(SequenceModel::zeros(), settings)?;
            let bags = workspace.concept_bags();
            let base = LdaConfig::new(k_grid.first().copied().unwrap_or(1), seed).with_iterations(iterations);
            let (selection, model) = topics::select_k(&bags, &k_grid, &base, DEFAULT_TOP_N, DEFAULT_WINDOW)?;
            std::fs::create_dir_all(&ws.model_dir)?;
            model.save(ws.model_dir.join(topics::MODEL_FILE))?;
            settings.save(&ws.model_dir)?;
            write_json(&selection, None)
        }
        Command::Search { query, ws, filter } => {
            let workspace = ws.workspace(SequenceModel::zeros(), AnalysisSettings::load_or_default(&ws.model_dir)?)?;
            write_json(&workspace.search(&query, filter.top_k, &filter.filter())?, None)
        }
        Command::Sankey { ws, collection, min_strength, max_nodes, out } => {
            let workspace = ws.workspace(ws.pico_model()?, AnalysisSettings::load_or_default(&ws.model_dir)?)?;
            let doc_ids = if let Some(id) = &collection.briefcase {
                let store = open_briefcases(&ws.corpus_dir, collection.briefcase_dir.as_deref())?;
                store.doc_ids_at(&collection.namespace, id, collection.version)?.1
            } else if let Some(q) = &collection.query {
                workspace
                    .search_collection(q, collection.filter.top_k, &collection.filter.filter())?
                    .doc_ids
            } else if !collection.docs.is_empty() {
                collection.docs.clone()
            } else {
                workspace.corpus().ids()
            };
            let options = SankeyOptions { min_strength, max_nodes_per_column: max_nodes };
            write_json(&workspace.sankey(&doc_ids, &options)?, out.as_deref())
        }
        Command::Briefcase { action, store } => {
            let briefcases = store.open()?;
            let ns = store.namespace.as_str();
            match action {
                BriefcaseAction::List => write_json(&briefcases.list(ns), None),
                BriefcaseAction::Create { name } => write_json(&briefcases.create(ns, &name)?, None),
                BriefcaseAction::Add { briefcase, doc_ids } | BriefcaseAction::Remove { briefcase, doc_ids }
                    if doc_ids.is_empty() =>
                {
                    bail!("no document ids given for {briefcase}")
                }
                BriefcaseAction::Add { briefcase, doc_ids } => {
                    let corpus = open_corpus(&store.corpus_dir)?;
                    write_json(&briefcases.mutate(ns, &briefcase, &doc_ids, &[], |d| corpus.contains(d))?, None)
                }
                BriefcaseAction::Remove { briefcase, doc_ids } => {
                    let corpus = open_corpus(&store.corpus_dir)?;
                    write_json(&briefcases.mutate(ns, &briefcase, &[], &doc_ids, |d| corpus.contains(d))?, None)
                }
            }
        }
        Command::Export { briefcase, version, store, out } => {
            let corpus = open_corpus(&store.corpus_dir)?;
            let exported = store.open()?.export(&store.namespace, &briefcase, version, &corpus)?;
            write_json(&exported, out.as_deref())
        }
        Command::Serve { ws, port, host, briefcase_dir } => {
            let workspace = ws.full_workspace()?;
            let briefcases = open_briefcases(&ws.corpus_dir, briefcase_dir.as_deref())?;
            let state = Arc::new(AppState::new(workspace, briefcases));
            let addr: SocketAddr = format!("{host}:{port}").parse().context("invalid --host/--port")?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                let bound = listener.local_addr()?;
                println!("listening on http://{bound}");
                std::io::stdout().flush()?;
                api::serve(listener, state).await?;
                Ok(())
            })
        }
    }
}
