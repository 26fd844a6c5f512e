//! Data bundled with the crate: a small coronavirus abstract corpus, a
//! concept vocabulary, the PubMed stopword list and PICO-annotated text.
//!
//! Concept identifiers in the vocabulary follow UMLS CUI syntax; apart from
//! a handful of well-known ones they are illustrative.

use crate::pico::{self, LabeledSequence};
use crate::vocab::{StopList, Vocabulary};

/// 46 abstract records in the corpus JSONL schema.
pub const CORPUS_JSONL: &str = include_str!("../data/corpus.jsonl");
/// Vocabulary TSV (`concept_id`, `is_mesh`, `preferred_term`, `variant`).
pub const VOCABULARY_TSV: &str = include_str!("../data/vocabulary.tsv");
pub const PUBMED_STOPWORDS: &str = include_str!("../data/pubmed_stopwords.txt");
/// `doc_id<TAB>abstract` with `[P ...]`, `[I ...]`, `[O ...]` span markup.
pub const PICO_GOLD: &str = include_str!("../data/pico_gold.txt");
pub const PICO_TRAIN_CONLL: &str = include_str!("../data/pico/train.conll");
pub const PICO_TEST_CONLL: &str = include_str!("../data/pico/test.conll");

/// Documents whose abstracts are about the incubation period of COVID-19 or
/// related coronaviruses; the reference relevant set for that query.
pub const INCUBATION_RELEVANT: &[&str] = &["cs001", "cs002", "cs003", "cs004", "cs005", "cs006"];

pub fn vocabulary() -> Vocabulary {
    Vocabulary::from_tsv(VOCABULARY_TSV).expect("bundled vocabulary parses")
}

pub fn stoplist() -> StopList {
    StopList::from_text(PUBMED_STOPWORDS)
}

pub fn pico_train() -> Vec<LabeledSequence> {
    pico::conll::parse(PICO_TRAIN_CONLL).expect("bundled training data parses")
}

pub fn pico_test() -> Vec<LabeledSequence> {
    pico::conll::parse(PICO_TEST_CONLL).expect("bundled test data parses")
}

/// Gold markup lines as `(doc_id, markup)`.
pub fn pico_gold() -> impl Iterator<Item = (&'static str, &'static str)> {
    PICO_GOLD
        .lines()
        .filter_map(|l| l.split_once('\t'))
}
