use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};

pub const NPMI_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coherence {
    pub per_topic: Vec<f64>,
    pub mean: f64,
    /// Top terms that occur in no window; scored with the ε floor.
    pub absent_terms: Vec<String>,
}

/// Normalized PMI from window probabilities.
///
/// `log((p_ij + ε) / (p_i p_j)) / -log(p_ij + ε)`, with `p_i`, `p_j` floored
/// at ε. A pair present in every window (`p_ij = 1`) scores 1.
pub fn npmi(p_i: f64, p_j: f64, p_ij: f64) -> f64 {
    if p_ij >= 1.0 {
        return 1.0;
    }
    let joint = p_ij + NPMI_EPSILON;
    let (p_i, p_j) = (p_i.max(NPMI_EPSILON), p_j.max(NPMI_EPSILON));
    (joint / (p_i * p_j)).ln() / -joint.ln()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// C_v coherence of each topic's top terms against `texts`.
///
/// Windows are boolean: a text no longer than `window` is one window, a
/// longer text contributes every `window`-length slice. Each term's context
/// vector holds its NPMI with every top term (itself included); the topic
/// scores the mean cosine between each vector and their sum.
pub fn coherence_cv<T, S>(topics: &[Vec<T>], texts: &[S], window: usize) -> Result<Coherence>
where
    T: AsRef<str>,
    S: AsRef<[String]>,
{
    if window == 0 {
        return Err(Error::InvalidInput("window must be at least 1".into()));
    }
    if topics.iter().any(|t| t.len() < 2) {
        return Err(Error::InvalidInput("coherence needs at least 2 terms per topic".into()));
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for term in topics.iter().flatten() {
        let next = ids.len();
        ids.entry(term.as_ref()).or_insert(next);
    }

    let mut windows = 0usize;
    let mut single = vec![0usize; ids.len()];
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut count_window = |terms: &[String]| {
        let present: BTreeSet<usize> = terms.iter().filter_map(|t| ids.get(t.as_str()).copied()).collect();
        windows += 1;
        for (i, &a) in present.iter().enumerate() {
            single[a] += 1;
            for &b in present.iter().skip(i + 1) {
                *joint.entry((a, b)).or_default() += 1;
            }
        }
    };
    for text in texts {
        let text = text.as_ref();
        if text.is_empty() {
            continue;
        }
        if text.len() <= window {
            count_window(text);
        } else {
            for start in 0..=text.len() - window {
                count_window(&text[start..start + window]);
            }
        }
    }
    if windows == 0 {
        return Err(Error::InvalidInput("coherence corpus has no text".into()));
    }

    let n = windows as f64;
    let p = |t: &str| single[ids[t]] as f64 / n;
    let p2 = |a: &str, b: &str| {
        let (a, b) = (ids[a], ids[b]);
        if a == b {
            return single[a] as f64 / n;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        joint.get(&key).copied().unwrap_or(0) as f64 / n
    };

    let mut absent: BTreeSet<String> = BTreeSet::new();
    let mut per_topic = Vec::with_capacity(topics.len());
    for topic in topics {
        let terms: Vec<&str> = topic.iter().map(AsRef::as_ref).collect();
        for t in &terms {
            if p(t) == 0.0 {
                absent.insert(t.to_string());
            }
        }
        let vectors: Vec<Vec<f64>> = terms
            .iter()
            .map(|a| terms.iter().map(|b| npmi(p(a), p(b), p2(a, b))).collect())
            .collect();
        let mut total = vec![0.0; terms.len()];
        for v in &vectors {
            for (s, x) in total.iter_mut().zip(v) {
                *s += x;
            }
        }
        let score = vectors.iter().map(|v| cosine(v, &total)).sum::<f64>() / vectors.len() as f64;
        per_topic.push(score);
    }
    let mean = if per_topic.is_empty() {
        0.0
    } else {
        per_topic.iter().sum::<f64>() / per_topic.len() as f64
    };
    Ok(Coherence {
        per_topic,
        mean,
        absent_terms: absent.into_iter().collect(),
    })
}
