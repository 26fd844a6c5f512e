//! LDA topic model over concept bags.
//!
//! Training is collapsed Gibbs sampling with symmetric Dirichlet priors. The
//! number of topics is picked by C_v coherence, topics relevant to a document
//! selection are those whose mean weight over the selection exceeds a
//! threshold, and topics are laid out in 2-D by classical scaling of their
//! Jensen-Shannon divergences.

mod coherence;
mod projection;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use coherence::{coherence_cv, npmi, Coherence, NPMI_EPSILON};
pub use projection::{classical_mds, js_divergence, project_2d, MapTopic, TopicMap2D};

pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_TOP_N: usize = 10;
pub const DEFAULT_WINDOW: usize = 110;
pub const DEFAULT_TOPIC_THRESHOLD: f64 = 0.05;
pub const MODEL_FILE: &str = "lda.json";

/// Concept display labels of one document, in text order, with repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptBag {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

impl ConceptBag {
    pub fn new<I, S>(doc_id: impl Into<String>, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ConceptBag {
            doc_id: doc_id.into(),
            tokens: tokens.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Defaults to `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        LdaConfig {
            k,
            alpha: None,
            beta: DEFAULT_BETA,
            iterations: DEFAULT_ITERATIONS,
            seed,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// Collapsed Gibbs sampler state. Exposed so callers can step through
/// training one sweep at a time.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<usize>>,
    z: Vec<Vec<usize>>,
    ndk: Vec<u32>,
    nvk: Vec<u32>,
    nk: Vec<u32>,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
}

impl GibbsSampler {
    /// `docs` holds word ids in `0..v`. Topics start uniformly at random.
    pub fn new(docs: Vec<Vec<usize>>, v: usize, k: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ndk = vec![0; docs.len() * k];
        let mut nvk = vec![0; v * k];
        let mut nk = vec![0; k];
        let z = docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                words
                    .iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        ndk[d * k + t] += 1;
                        nvk[w * k + t] += 1;
                        nk[t] += 1;
                        t
                    })
                    .collect()
            })
            .collect();
        GibbsSampler {
            k,
            v,
            alpha,
            beta,
            docs,
            z,
            ndk,
            nvk,
            nk,
            rng,
            probs: vec![0.0; k],
        }
    }

    /// One pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let (k, vbeta) = (self.k, self.v as f64 * self.beta);
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.z[d][i];
                self.ndk[d * k + old] -= 1;
                self.nvk[w * k + old] -= 1;
                self.nk[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.ndk[d * k + t] as f64 + self.alpha) * (self.nvk[w * k + t] as f64 + self.beta)
                        / (self.nk[t] as f64 + vbeta);
                    total += p;
                    self.probs[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.probs.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.z[d][i] = new;
                self.ndk[d * k + new] += 1;
                self.nvk[w * k + new] += 1;
                self.nk[new] += 1;
            }
        }
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Whether every count table agrees with the current assignments.
    pub fn counts_consistent(&self) -> bool {
        let k = self.k;
        let mut ndk = vec![0u32; self.docs.len() * k];
        let mut nvk = vec![0u32; self.v * k];
        let mut nk = vec![0u32; k];
        for (d, (words, zs)) in self.docs.iter().zip(&self.z).enumerate() {
            for (&w, &t) in words.iter().zip(zs) {
                ndk[d * k + t] += 1;
                nvk[w * k + t] += 1;
                nk[t] += 1;
            }
        }
        ndk == self.ndk
            && nvk == self.nvk
            && nk == self.nk
            && nk.iter().map(|&c| c as usize).sum::<usize>() == self.total_tokens()
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.z
    }
}

/// A trained model. Distributions are recomputed from the stored
/// assignments, so a saved model reloads to identical values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "StoredModel", try_from = "StoredModel")]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    /// D×K.
    pub doc_topic: Vec<Vec<f64>>,
    /// K×V, columns in `vocabulary` order.
    pub topic_term: Vec<Vec<f64>>,
    /// Tokens assigned to each topic.
    pub topic_tokens: Vec<usize>,
    doc_index: HashMap<String, usize>,
    term_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    k: usize,
    alpha: f64,
    beta: f64,
    iterations: usize,
    seed: u64,
    vocabulary: Vec<String>,
    doc_ids: Vec<String>,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
}

impl From<TopicModel> for StoredModel {
    fn from(m: TopicModel) -> Self {
        StoredModel {
            k: m.k,
            alpha: m.alpha,
            beta: m.beta,
            iterations: m.iterations,
            seed: m.seed,
            vocabulary: m.vocabulary,
            doc_ids: m.doc_ids,
            docs: m.docs,
            assignments: m.assignments,
        }
    }
}

impl TryFrom<StoredModel> for TopicModel {
    type Error = Error;

    fn try_from(s: StoredModel) -> Result<Self> {
        let bad = |detail: &str| Error::parse("topic model", detail.to_string());
        if s.k < 2 || s.docs.len() != s.doc_ids.len() || s.assignments.len() != s.docs.len() {
            return Err(bad("inconsistent dimensions"));
        }
        for (words, zs) in s.docs.iter().zip(&s.assignments) {
            if words.len() != zs.len()
                || words.iter().any(|&w| w >= s.vocabulary.len())
                || zs.iter().any(|&t| t >= s.k)
            {
                return Err(bad("assignment out of range"));
            }
        }
        Ok(TopicModel::from_counts(
            s.k,
            s.alpha,
            s.beta,
            s.iterations,
            s.seed,
            s.vocabulary,
            s.doc_ids,
            s.docs,
            s.assignments,
        ))
    }
}

impl TopicModel {
    #[allow(clippy::too_many_arguments)]
    fn from_counts(
        k: usize,
        alpha: f64,
        beta: f64,
        iterations: usize,
        seed: u64,
        vocabulary: Vec<String>,
        doc_ids: Vec<String>,
        docs: Vec<Vec<usize>>,
        assignments: Vec<Vec<usize>>,
    ) -> Self {
        let v = vocabulary.len();
        let mut nkv = vec![vec![0usize; v]; k];
        let mut nk = vec![0usize; k];
        let mut doc_topic = Vec::with_capacity(docs.len());
        for (words, zs) in docs.iter().zip(&assignments) {
            let mut ndk = vec![0usize; k];
            for (&w, &t) in words.iter().zip(zs) {
                ndk[t] += 1;
                nkv[t][w] += 1;
                nk[t] += 1;
            }
            let denom = words.len() as f64 + k as f64 * alpha;
            doc_topic.push(ndk.iter().map(|&c| (c as f64 + alpha) / denom).collect());
        }
        let topic_term = nkv
            .iter()
            .zip(&nk)
            .map(|(row, &n)| {
                let denom = n as f64 + v as f64 * beta;
                row.iter().map(|&c| (c as f64 + beta) / denom).collect()
            })
            .collect();
        TopicModel {
            k,
            alpha,
            beta,
            iterations,
            seed,
            doc_index: doc_ids.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect(),
            term_index: vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect(),
            vocabulary,
            doc_ids,
            docs,
            assignments,
            doc_topic,
            topic_term,
            topic_tokens: nk,
        }
    }

    /// Doc-topic row of a training document.
    pub fn doc_row(&self, doc_id: &str) -> Option<&[f64]> {
        self.doc_index.get(doc_id).map(|&i| self.doc_topic[i].as_slice())
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn term_id(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    /// The `n` most probable terms of topic `k`; ties by vocabulary order.
    pub fn top_terms(&self, k: usize, n: usize) -> Vec<(&str, f64)> {
        let row = &self.topic_term[k];
        let mut ids: Vec<usize> = (0..row.len()).collect();
        ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        ids.into_iter()
            .take(n)
            .map(|i| (self.vocabulary[i].as_str(), row[i]))
            .collect()
    }

    /// Topics relevant to a set of training documents; see [`topics_for_rows`].
    pub fn topics_for_selection<S: AsRef<str>>(&self, doc_ids: &[S], t: f64) -> Result<Vec<(usize, f64)>> {
        let rows = doc_ids
            .iter()
            .map(|d| {
                self.doc_row(d.as_ref())
                    .ok_or_else(|| Error::UnknownDocument(d.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        topics_for_rows(&rows, t)
    }

    /// Infers a doc-topic row for an unseen bag with `topic_term` held fixed.
    ///
    /// Unknown terms are ignored. The row is the smoothed estimate averaged
    /// over the second half of the sweeps. A bag with no known terms yields
    /// the uniform row and `flagged = true`.
    pub fn fold_in<S: AsRef<str>>(&self, bag: &[S], iterations: usize, seed: u64) -> FoldIn {
        let k = self.k;
        let words: Vec<usize> = bag.iter().filter_map(|t| self.term_id(t.as_ref())).collect();
        if words.is_empty() {
            return FoldIn {
                row: vec![1.0 / k as f64; k],
                flagged: true,
            };
        }
        let iterations = iterations.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ndk = vec![0usize; k];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                ndk[t] += 1;
                t
            })
            .collect();
        let denom = words.len() as f64 + k as f64 * self.alpha;
        let mut acc = vec![0.0; k];
        let mut samples = 0usize;
        let mut cumulative = vec![0.0; k];
        for sweep in 0..iterations {
            for (i, &w) in words.iter().enumerate() {
                ndk[z[i]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (ndk[t] as f64 + self.alpha) * self.topic_term[t][w];
                    cumulative[t] = total;
                }
                let u = rng.random::<f64>() * total;
                z[i] = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);
                ndk[z[i]] += 1;
            }
            if sweep >= iterations / 2 {
                for (a, &c) in acc.iter_mut().zip(&ndk) {
                    *a += (c as f64 + self.alpha) / denom;
                }
                samples += 1;
            }
        }
        let row: Vec<f64> = acc.iter().map(|a| a / samples as f64).collect();
        let sum: f64 = row.iter().sum();
        FoldIn {
            row: row.iter().map(|r| r / sum).collect(),
            flagged: false,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldIn {
    pub row: Vec<f64>,
    pub flagged: bool,
}

/// Trains LDA on the non-empty bags. The vocabulary is the sorted set of
/// all tokens.
pub fn train_lda(bags: &[ConceptBag], config: &LdaConfig) -> Result<TopicModel> {
    let mut sampler_input = prepare(bags, config)?;
    let mut sampler = GibbsSampler::new(
        std::mem::take(&mut sampler_input.docs),
        sampler_input.vocabulary.len(),
        config.k,
        config.alpha(),
        config.beta,
        config.seed,
    );
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    let GibbsSampler { docs, z, .. } = sampler;
    Ok(TopicModel::from_counts(
        config.k,
        config.alpha(),
        config.beta,
        config.iterations,
        config.seed,
        sampler_input.vocabulary,
        sampler_input.doc_ids,
        docs,
        z,
    ))
}

struct Prepared {
    vocabulary: Vec<String>,
    doc_ids: Vec<String>,
    docs: Vec<Vec<usize>>,
}

fn prepare(bags: &[ConceptBag], config: &LdaConfig) -> Result<Prepared> {
    if config.k < 2 {
        return Err(Error::InvalidInput(format!("K must be at least 2, got {}", config.k)));
    }
    if config.iterations == 0 {
        return Err(Error::InvalidInput("iterations must be at least 1".into()));
    }
    if !(config.alpha() > 0.0 && config.beta > 0.0) {
        return Err(Error::InvalidInput("alpha and beta must be positive".into()));
    }
    let used: Vec<&ConceptBag> = bags.iter().filter(|b| !b.tokens.is_empty()).collect();
    if used.is_empty() {
        return Err(Error::InvalidInput("empty corpus: no document has concept terms".into()));
    }
    if used.len() < config.k {
        return Err(Error::InvalidInput(format!(
            "{} documents with terms is fewer than K = {}",
            used.len(),
            config.k
        )));
    }
    let vocabulary: Vec<String> = used
        .iter()
        .flat_map(|b| b.tokens.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let docs = used
        .iter()
        .map(|b| b.tokens.iter().map(|t| index[t.as_str()]).collect())
        .collect();
    Ok(Prepared {
        doc_ids: used.iter().map(|b| b.doc_id.clone()).collect(),
        vocabulary,
        docs,
    })
}

/// A sampler positioned before the first sweep of `train_lda(bags, config)`.
pub fn sampler_for(bags: &[ConceptBag], config: &LdaConfig) -> Result<GibbsSampler> {
    let p = prepare(bags, config)?;
    Ok(GibbsSampler::new(
        p.docs,
        p.vocabulary.len(),
        config.k,
        config.alpha(),
        config.beta,
        config.seed,
    ))
}

/// Topics whose mean weight over `rows` is strictly above `t`, by descending
/// mean (ties by topic id).
pub fn topics_for_rows<R: AsRef<[f64]>>(rows: &[R], t: f64) -> Result<Vec<(usize, f64)>> {
    let first = rows.first().ok_or(Error::EmptyCollection)?;
    let k = first.as_ref().len();
    let mut mean = vec![0.0; k];
    for row in rows {
        let row = row.as_ref();
        if row.len() != k {
            return Err(Error::LengthMismatch(format!("doc-topic rows of length {k} and {}", row.len())));
        }
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = rows.len() as f64;
    let mut out: Vec<(usize, f64)> = mean
        .into_iter()
        .map(|m| m / n)
        .enumerate()
        .filter(|&(_, m)| m > t)
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSelection {
    pub best_k: usize,
    /// `(K, mean coherence)` per candidate, in candidate order.
    pub scores: Vec<(usize, f64)>,
}

/// Trains one model per candidate K with the same seed and settings and
/// keeps the most coherent; ties go to the smaller K.
pub fn select_k(
    bags: &[ConceptBag],
    candidates: &[usize],
    base: &LdaConfig,
    top_n: usize,
    window: usize,
) -> Result<(KSelection, TopicModel)> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate K".into()));
    }
    let texts: Vec<&[String]> = bags.iter().map(|b| b.tokens.as_slice()).collect();
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64, TopicModel)> = None;
    for &k in candidates {
        let config = LdaConfig { k, ..*base };
        let model = train_lda(bags, &config)?;
        let topics: Vec<Vec<&str>> = (0..k)
            .map(|t| model.top_terms(t, top_n).into_iter().map(|(w, _)| w).collect())
            .collect();
        let score = coherence_cv(&topics, &texts, window)?.mean;
        tracing::debug!(k, score, "coherence");
        scores.push((k, score));
        let better = match &best {
            None => true,
            Some((bk, bs, _)) => score > *bs || (score == *bs && k < *bk),
        };
        if better {
            best = Some((k, score, model));
        }
    }
    let (best_k, _, model) = best.expect("at least one candidate");
    Ok((KSelection { best_k, scores }, model))
}
