//! Log-likelihood (G²) keyness of one document's concepts against the rest
//! of a briefcase, and the concept cloud built from it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CLOUD_SIZE: usize = 20;

/// G² = 2 Σ O_i ln(O_i / E_i) with E_i = N_i (O1 + O2) / (N1 + N2).
/// Zero observed counts contribute nothing; `O1 + O2 = 0` gives 0.
pub fn g2(o1: u64, n1: u64, o2: u64, n2: u64) -> f64 {
    let (o1f, n1f, o2f, n2f) = (o1 as f64, n1 as f64, o2 as f64, n2 as f64);
    let total = o1f + o2f;
    if total == 0.0 || n1f + n2f == 0.0 {
        return 0.0;
    }
    let e1 = n1f * total / (n1f + n2f);
    let e2 = n2f * total / (n1f + n2f);
    let term = |o: f64, e: f64| if o > 0.0 { o * (o / e).ln() } else { 0.0 };
    (2.0 * (term(o1f, e1) + term(o2f, e2))).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeynessResult {
    pub label: String,
    pub target_count: u64,
    pub background_count: u64,
    pub target_size: u64,
    pub background_size: u64,
    pub g2: f64,
    /// Relative frequency higher in the target than in the background.
    pub overused: bool,
}

/// Keyness of every concept in `target` against `background`, unsorted
/// (label order).
pub fn keyness<S: AsRef<str>>(target: &[S], background: &[&[S]]) -> Result<Vec<KeynessResult>> {
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for t in target {
        counts.entry(t.as_ref()).or_default().0 += 1;
    }
    for doc in background {
        for t in *doc {
            counts.entry(t.as_ref()).or_default().1 += 1;
        }
    }
    let n1 = target.len() as u64;
    let n2: u64 = background.iter().map(|d| d.len() as u64).sum();
    if n2 == 0 {
        return Err(Error::EmptyBackground);
    }
    Ok(counts
        .into_iter()
        .map(|(label, (o1, o2))| KeynessResult {
            label: label.to_string(),
            target_count: o1,
            background_count: o2,
            target_size: n1,
            background_size: n2,
            g2: g2(o1, n1, o2, n2),
            overused: (o1 as u128) * (n2 as u128) > (o2 as u128) * (n1 as u128),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudTerm {
    pub label: String,
    pub g2: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptCloud {
    pub doc_id: String,
    pub terms: Vec<CloudTerm>,
    /// No concept is overused in the target; `terms` ranks by raw frequency.
    pub frequency_fallback: bool,
}

/// Top `top_k` concepts of `doc_id` against the other documents of `bags`.
///
/// Only overused concepts qualify; they rank by G², then target count, then
/// label. When none qualifies the target's concepts rank by count, then
/// label, and the cloud is flagged.
pub fn concept_cloud<S: AsRef<str>>(doc_id: &str, bags: &BTreeMap<String, Vec<S>>, top_k: usize) -> Result<ConceptCloud> {
    let target = bags
        .get(doc_id)
        .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
    let background: Vec<&[S]> = bags
        .iter()
        .filter(|(id, _)| id.as_str() != doc_id)
        .map(|(_, b)| b.as_slice())
        .collect();
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let table = keyness(target, &background)?;

    let mut overused: Vec<&KeynessResult> = table.iter().filter(|r| r.overused && r.g2 > 0.0).collect();
    let frequency_fallback = overused.is_empty();
    if frequency_fallback {
        overused = table.iter().filter(|r| r.target_count > 0).collect();
        overused.sort_by(|a, b| b.target_count.cmp(&a.target_count).then_with(|| a.label.cmp(&b.label)));
    } else {
        overused.sort_by(|a, b| {
            b.g2.total_cmp(&a.g2)
                .then_with(|| b.target_count.cmp(&a.target_count))
                .then_with(|| a.label.cmp(&b.label))
        });
    }
    Ok(ConceptCloud {
        doc_id: doc_id.to_string(),
        terms: overused
            .into_iter()
            .take(top_k)
            .map(|r| CloudTerm {
                label: r.label.clone(),
                g2: r.g2,
                count: r.target_count,
            })
            .collect(),
        frequency_fallback,
    })
}

/// Labels appearing in every bag; they can never be overused in any target.
pub fn common_labels<S: AsRef<str>>(bags: &BTreeMap<String, Vec<S>>) -> BTreeSet<String> {
    let mut iter = bags.values();
    let Some(first) = iter.next() else {
        return BTreeSet::new();
    };
    let mut common: BTreeSet<String> = first.iter().map(|s| s.as_ref().to_string()).collect();
    for bag in iter {
        let here: BTreeSet<&str> = bag.iter().map(AsRef::as_ref).collect();
        common.retain(|l| here.contains(l.as_str()));
    }
    common
}
