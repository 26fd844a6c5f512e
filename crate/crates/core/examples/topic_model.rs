//! Trains the global topic model with K chosen by coherence, then looks at
//! the topics of a search-result collection and their 2-D map.
//!
//! ```bash
//! cargo run --release -p litscope --example topic_model
//! ```

use litscope::analysis::{AnalysisSettings, Workspace};
use litscope::corpus::{CorpusFormat, CorpusStore, DocFilter};
use litscope::fixtures;
use litscope::pico::SequenceModel;
use litscope::topics::{select_k, LdaConfig, DEFAULT_TOP_N, DEFAULT_WINDOW};

fn main() -> litscope::Result<()> {
    let mut corpus = CorpusStore::in_memory();
    corpus.ingest_reader(fixtures::CORPUS_JSONL.as_bytes(), CorpusFormat::Jsonl)?;
    // The bundled corpus is tiny; excluding 100 frequent concepts would leave
    // almost nothing to model.
    let settings = AnalysisSettings {
        top_frequent: 10,
        ..AnalysisSettings::default()
    };
    let ws = Workspace::new(corpus, fixtures::vocabulary(), fixtures::stoplist(), SequenceModel::zeros(), settings)?;

    let bags = ws.concept_bags();
    let (selection, model) = select_k(&bags, &[3, 5, 8], &LdaConfig::new(3, 42), DEFAULT_TOP_N, DEFAULT_WINDOW)?;
    for (k, c) in &selection.scores {
        println!("K={k}: C_v {c:.4}");
    }
    println!("chose K={}", selection.best_k);
    for k in 0..model.k {
        let terms: Vec<&str> = model.top_terms(k, 6).into_iter().map(|(t, _)| t).collect();
        println!("  topic {k}: {}", terms.join(", "));
    }

    let ws = ws.with_topic_model(model);
    let hits = ws.search_collection("incubation period", 10, &DocFilter::default())?;
    if let Some(view) = ws.topics(&hits.doc_ids, 0.05)? {
        println!("\ntopics of {} search hits (t = {}):", hits.doc_ids.len(), view.threshold);
        for t in &view.topics {
            println!(
                "  topic {} weight {:.3} at ({:.3}, {:.3})",
                t.topic.id, t.selection_weight, t.topic.x, t.topic.y
            );
        }
    }
    Ok(())
}
