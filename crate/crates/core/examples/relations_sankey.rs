//! PICO relations of a document collection and their Sankey layout.
//!
//! ```bash
//! cargo run -p litscope --example relations_sankey
//! ```

use litscope::analysis::{AnalysisSettings, Workspace};
use litscope::corpus::{CorpusFormat, CorpusStore};
use litscope::fixtures;
use litscope::pico::{self, TrainConfig};
use litscope::relations::SankeyOptions;

fn main() -> litscope::Result<()> {
    let mut corpus = CorpusStore::in_memory();
    corpus.ingest_reader(fixtures::CORPUS_JSONL.as_bytes(), CorpusFormat::Jsonl)?;
    let model = pico::train(&fixtures::pico_train(), &TrainConfig::default())?;
    let ws = Workspace::new(corpus, fixtures::vocabulary(), fixtures::stoplist(), model, AnalysisSettings::default())?;

    let docs = ws.corpus().ids();
    let relations = ws.relations(&docs)?;
    println!("{} typed pairs over {} documents; strongest:", relations.len(), docs.len());
    let mut ranked: Vec<_> = relations.iter().collect();
    ranked.sort_by_key(|r| std::cmp::Reverse(r.strength));
    for r in ranked.iter().take(8) {
        println!(
            "  {:>2}  {} -> {}  {:?}",
            r.strength,
            ws.label(&r.left.concept_id),
            ws.label(&r.right.concept_id),
            r.supporting_docs
        );
    }

    let options = SankeyOptions {
        min_strength: 2,
        max_nodes_per_column: 8,
    };
    let graph = ws.sankey(&docs, &options)?;
    println!("\n{}", serde_json::to_string_pretty(&graph)?);
    Ok(())
}
