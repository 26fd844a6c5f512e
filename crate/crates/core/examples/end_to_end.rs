//! The whole workflow in one process: build the workspace, train the topic
//! model, then serve the API.
//!
//! ```bash
//! cargo run --release -p litscope --example end_to_end -- 8080
//! curl 'localhost:8080/api/search?q=incubation%20period'
//! curl 'localhost:8080/api/dashboard?q=incubation%20period&top_k=10'
//! ```
//!
//! Without a port argument it prints one dashboard payload and exits.

use std::sync::Arc;

use litscope::analysis::{AnalysisSettings, Workspace, TOPIC_THRESHOLD};
use litscope::api::{self, AppState};
use litscope::briefcase::BriefcaseStore;
use litscope::corpus::{CorpusFormat, CorpusStore, DocFilter};
use litscope::fixtures;
use litscope::pico::{self, TrainConfig};
use litscope::relations::SankeyOptions;
use litscope::topics::{select_k, LdaConfig, DEFAULT_TOP_N, DEFAULT_WINDOW};

fn main() -> litscope::Result<()> {
    let mut corpus = CorpusStore::in_memory();
    corpus.ingest_reader(fixtures::CORPUS_JSONL.as_bytes(), CorpusFormat::Jsonl)?;
    let pico_model = pico::train(&fixtures::pico_train(), &TrainConfig::default())?;
    let settings = AnalysisSettings {
        top_frequent: 10,
        ..AnalysisSettings::default()
    };
    let ws = Workspace::new(corpus, fixtures::vocabulary(), fixtures::stoplist(), pico_model, settings)?;
    let (selection, lda) = select_k(&ws.concept_bags(), &[3, 5, 8], &LdaConfig::new(3, 42), DEFAULT_TOP_N, DEFAULT_WINDOW)?;
    eprintln!("topic model: K = {}", selection.best_k);
    let ws = ws.with_topic_model(lda);

    let Some(port) = std::env::args().nth(1) else {
        let collection = ws.search_collection("incubation period", 10, &DocFilter::default())?;
        let payload = ws.dashboard(collection, &SankeyOptions::default(), TOPIC_THRESHOLD)?;
        println!("{}", serde_json::to_string_pretty(&payload)?);
        return Ok(());
    };

    let state = Arc::new(AppState::new(ws, BriefcaseStore::in_memory()));
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port.parse().expect("port")))
            .await
            .expect("bind");
        eprintln!("listening on http://{}", listener.local_addr().unwrap());
        api::serve(listener, state).await.expect("server");
    });
    Ok(())
}
