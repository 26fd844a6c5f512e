//! Keyness of one document's concepts against the rest of a briefcase.
//!
//! ```bash
//! cargo run -p litscope --example concept_cloud
//! ```

use litscope::analysis::{AnalysisSettings, Workspace};
use litscope::corpus::{CorpusFormat, CorpusStore};
use litscope::fixtures;
use litscope::keyness::g2;
use litscope::pico::SequenceModel;

fn main() -> litscope::Result<()> {
    println!("G2(10 of 100 vs 2 of 200) = {:.4}", g2(10, 100, 2, 200));
    println!("G2(5 of 100 vs 10 of 200) = {}", g2(5, 100, 10, 200));

    let mut corpus = CorpusStore::in_memory();
    corpus.ingest_reader(fixtures::CORPUS_JSONL.as_bytes(), CorpusFormat::Jsonl)?;
    let settings = AnalysisSettings {
        top_frequent: 10,
        ..AnalysisSettings::default()
    };
    let ws = Workspace::new(corpus, fixtures::vocabulary(), fixtures::stoplist(), SequenceModel::zeros(), settings)?;

    let briefcase = fixtures::INCUBATION_RELEVANT;
    for doc in &briefcase[..2] {
        let cloud = ws.cloud(doc, briefcase)?;
        let flag = if cloud.frequency_fallback { " (frequency-ranked)" } else { "" };
        println!("\n{doc}: {}{flag}", ws.corpus().get(doc).unwrap().title);
        for t in &cloud.terms {
            println!("  {:<28} G2 {:>7.3}  x{}", t.label, t.g2, t.count);
        }
    }
    Ok(())
}
