//! Versioned briefcases: create, add, remove, export an older version, and
//! reopen the store from disk.
//!
//! ```bash
//! cargo run -p litscope --example briefcase_workflow
//! ```

use litscope::briefcase::BriefcaseStore;
use litscope::corpus::{CorpusFormat, CorpusStore};
use litscope::fixtures;

fn main() -> litscope::Result<()> {
    let mut corpus = CorpusStore::in_memory();
    corpus.ingest_reader(fixtures::CORPUS_JSONL.as_bytes(), CorpusFormat::Jsonl)?;
    let dir = tempfile_dir();
    let store = BriefcaseStore::open(&dir)?;
    let known = |id: &str| corpus.contains(id);

    let bc = store.create("me", "Incubation")?;
    store.mutate("me", &bc.briefcase_id, &["cs001".into(), "cs002".into(), "cs003".into()], &[], known)?;
    let latest = store.mutate("me", &bc.briefcase_id, &["cs004".into()], &["cs002".into()], known)?;
    for snap in &latest.history {
        println!("v{}: {:?}", snap.version, snap.doc_ids);
    }

    let export = store.export("me", &bc.briefcase_id, Some(2), &corpus)?;
    println!("\nexport of v2:\n{}", serde_json::to_string_pretty(&export["documents"][0])?);

    drop(store);
    let reopened = BriefcaseStore::open(&dir)?;
    println!("\nafter reopen: {:?}", reopened.get("me", &bc.briefcase_id)?.doc_ids);
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("litscope-briefcases-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create temp dir");
    dir
}
