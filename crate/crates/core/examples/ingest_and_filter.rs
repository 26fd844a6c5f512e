//! Ingests the bundled corpus into a directory store and filters it.
//!
//! ```bash
//! cargo run -p litscope --example ingest_and_filter
//! ```

use litscope::corpus::{CorpusFormat, CorpusStore, DocFilter};
use litscope::fixtures;

fn main() -> litscope::Result<()> {
    let dir = std::env::temp_dir().join("litscope-ingest-example");
    let mut store = CorpusStore::open(&dir)?;
    let report = store.ingest_reader(fixtures::CORPUS_JSONL.as_bytes(), CorpusFormat::Jsonl)?;
    store.persist()?;
    println!("{report:?}; {} documents under {}", store.len(), dir.display());

    let recent = DocFilter::default().years(2020, 2021).sources(["PMC"]);
    let ids = store.filter(&store.ids(), &recent);
    println!("{} PMC documents from 2020-2021", ids.len());
    for id in ids.iter().take(5) {
        let text = store.analysis_text(id)?;
        println!("  {id} [{:?}] {}", text.provenance, store.get(id).unwrap().title);
    }
    Ok(())
}
