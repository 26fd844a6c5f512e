//! Converts the bracket-annotated abstracts into CoNLL train/test files.
//!
//! Every third annotated document goes to the test split.
//!
//! ```bash
//! cargo run -p litscope --example annotate_conll -- crates/core/data/pico
//! ```

use std::fs;
use std::path::PathBuf;

use litscope::fixtures;
use litscope::pico::conll;

fn main() -> litscope::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("litscope-pico"));
    fs::create_dir_all(&out_dir).expect("create output directory");

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, (doc_id, markup)) in fixtures::pico_gold().enumerate() {
        let (_, seq) = conll::from_markup(doc_id, markup)?;
        if i % 3 == 2 {
            test.push(seq);
        } else {
            train.push(seq);
        }
    }

    for (name, seqs) in [("train.conll", &train), ("test.conll", &test)] {
        let path = out_dir.join(name);
        fs::write(&path, conll::to_string(seqs)).expect("write CoNLL file");
        let tokens: usize = seqs.iter().map(|s| s.tokens.len()).sum();
        println!("{}: {} sequences, {tokens} tokens", path.display(), seqs.len());
    }
    Ok(())
}
