//! BM25 retrieval over titles and analysis text.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusStore;
use crate::error::{Error, Result};
use crate::vocab::{normalized_words, StopList};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;
pub const DEFAULT_TOP_K: usize = 20;

/// Lucene-style idf; never negative.
pub fn idf(n: usize, df: usize) -> f64 {
    let (n, df) = (n as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    /// term -> (doc_id -> term frequency)
    pub postings: BTreeMap<String, BTreeMap<String, u32>>,
    pub doc_lengths: BTreeMap<String, usize>,
    pub avg_doc_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: String,
    pub score: f64,
    pub matched_terms: BTreeSet<String>,
}

impl InvertedIndex {
    /// Indexes `(doc_id, text)` pairs as lowercase alphanumeric words.
    pub fn from_texts<I, A, T>(docs: I) -> Self
    where
        I: IntoIterator<Item = (A, T)>,
        A: Into<String>,
        T: AsRef<str>,
    {
        let mut index = InvertedIndex::default();
        for (id, text) in docs {
            let id = id.into();
            let words = normalized_words(text.as_ref());
            index.doc_lengths.insert(id.clone(), words.len());
            for w in words {
                *index.postings.entry(w).or_default().entry(id.clone()).or_default() += 1;
            }
        }
        let n = index.doc_lengths.len();
        index.avg_doc_length = if n == 0 {
            0.0
        } else {
            index.doc_lengths.values().sum::<usize>() as f64 / n as f64
        };
        index
    }

    /// Title plus analysis text of every document; documents without
    /// analysable text are indexed by title only.
    pub fn build(store: &CorpusStore) -> Self {
        InvertedIndex::from_texts(store.documents().map(|doc| {
            let body = store.analysis_text(&doc.doc_id).map(|a| a.text).unwrap_or_default();
            (doc.doc_id.clone(), format!("{}\n{}", doc.title, body))
        }))
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, BTreeMap::len)
    }

    /// Query terms after lowercasing, stopword removal and deduplication, in
    /// first-appearance order.
    pub fn query_terms(query: &str, stoplist: &StopList) -> Vec<String> {
        let mut seen = BTreeSet::new();
        normalized_words(query)
            .into_iter()
            .filter(|w| !stoplist.contains(w))
            .filter(|w| seen.insert(w.clone()))
            .collect()
    }

    /// BM25 ranking restricted to `allowed` (all documents when `None`).
    /// Zero-score documents are omitted; ties break by doc id.
    pub fn search(
        &self,
        query: &str,
        stoplist: &StopList,
        top_k: usize,
        allowed: Option<&BTreeSet<String>>,
    ) -> Result<Vec<SearchHit>> {
        let terms = InvertedIndex::query_terms(query, stoplist);
        if terms.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let n = self.num_docs();
        let mut hits: BTreeMap<&str, SearchHit> = BTreeMap::new();
        for term in &terms {
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let term_idf = idf(n, postings.len());
            for (doc, &tf) in postings {
                if allowed.is_some_and(|a| !a.contains(doc)) {
                    continue;
                }
                let len = self.doc_lengths[doc] as f64;
                let tf = tf as f64;
                let norm = tf + K1 * (1.0 - B + B * len / self.avg_doc_length);
                let score = term_idf * tf * (K1 + 1.0) / norm;
                let hit = hits.entry(doc).or_insert_with(|| SearchHit {
                    doc_id: doc.clone(),
                    score: 0.0,
                    matched_terms: BTreeSet::new(),
                });
                hit.score += score;
                hit.matched_terms.insert(term.clone());
            }
        }
        let mut ranked: Vec<SearchHit> = hits.into_values().filter(|h| h.score > 0.0).collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
        ranked.truncate(top_k);
        Ok(ranked)
    }
}
