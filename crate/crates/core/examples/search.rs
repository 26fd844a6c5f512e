//! BM25 search with year and source filters.
//!
//! ```bash
//! cargo run -p litscope --example search -- "incubation period"
//! ```

use litscope::corpus::{CorpusFormat, CorpusStore, DocFilter};
use litscope::fixtures;
use litscope::search::InvertedIndex;
use std::collections::BTreeSet;

fn main() -> litscope::Result<()> {
    let query = std::env::args().nth(1).unwrap_or_else(|| "incubation period".into());
    let mut corpus = CorpusStore::in_memory();
    corpus.ingest_reader(fixtures::CORPUS_JSONL.as_bytes(), CorpusFormat::Jsonl)?;
    let index = InvertedIndex::build(&corpus);
    let stop = fixtures::stoplist();
    println!("query terms: {:?}", InvertedIndex::query_terms(&query, &stop));

    for (name, filter) in [
        ("all", DocFilter::default()),
        ("2020 only", DocFilter::default().years(2020, 2020)),
    ] {
        let allowed: BTreeSet<String> = corpus.filter(&corpus.ids(), &filter).into_iter().collect();
        println!("\n{name}:");
        for hit in index.search(&query, &stop, 5, Some(&allowed))? {
            let doc = corpus.get(&hit.doc_id).unwrap();
            println!("  {:.3}  {} ({:?}) {}", hit.score, hit.doc_id, doc.year, doc.title);
        }
    }
    Ok(())
}
