use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BioLabel, Token, NUM_LABELS};
use crate::error::{Error, Result};

pub const FEATURE_TEMPLATE_VERSION: &str = "v1";

/// Per-token label scores.
pub type Emissions = Vec<[f64; NUM_LABELS]>;
/// `transitions[prev][next]`; row `NUM_LABELS` is the sequence start.
pub type Transitions = [[f64; NUM_LABELS]; NUM_LABELS + 1];

const START: usize = NUM_LABELS;
const MODEL_HEADER: &str = "#litscope-pico-model";
const TRANSITION_PREFIX: &str = "__transition__:";

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub(super) features: HashMap<String, [f64; NUM_LABELS]>,
    pub(super) transitions: Transitions,
    pub feature_template_version: String,
}

impl Default for SequenceModel {
    fn default() -> Self {
        SequenceModel::zeros()
    }
}

impl SequenceModel {
    /// All-zero model; decodes every input as all-`O`.
    pub fn zeros() -> Self {
        SequenceModel {
            features: HashMap::new(),
            transitions: [[0.0; NUM_LABELS]; NUM_LABELS + 1],
            feature_template_version: FEATURE_TEMPLATE_VERSION.to_string(),
        }
    }

    pub fn feature_weight(&self, feature: &str, label: BioLabel) -> f64 {
        self.features.get(feature).map_or(0.0, |w| w[label.index()])
    }

    pub fn set_feature_weight(&mut self, feature: &str, label: BioLabel, weight: f64) {
        self.features
            .entry(feature.to_string())
            .or_insert([0.0; NUM_LABELS])[label.index()] = weight;
    }

    /// Transition weight; `prev = None` is the sequence start.
    pub fn transition_weight(&self, prev: Option<BioLabel>, next: BioLabel) -> f64 {
        self.transitions[prev.map_or(START, BioLabel::index)][next.index()]
    }

    pub fn set_transition_weight(&mut self, prev: Option<BioLabel>, next: BioLabel, weight: f64) {
        self.transitions[prev.map_or(START, BioLabel::index)][next.index()] = weight;
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn emissions(&self, tokens: &[Token]) -> Emissions {
        token_features(tokens)
            .iter()
            .map(|feats| {
                let mut scores = [0.0; NUM_LABELS];
                for f in feats {
                    if let Some(w) = self.features.get(f) {
                        for (s, w) in scores.iter_mut().zip(w) {
                            *s += w;
                        }
                    }
                }
                scores
            })
            .collect()
    }

    pub fn decode(&self, tokens: &[Token]) -> Vec<BioLabel> {
        viterbi(&self.emissions(tokens), &self.transitions)
    }

    /// Flat text: a header line, then `feature<TAB>label<TAB>weight` rows in
    /// sorted order; transitions use the feature name `__transition__:<prev>`.
    pub fn to_text(&self) -> String {
        let mut rows: BTreeMap<(String, usize), f64> = BTreeMap::new();
        for (feature, weights) in &self.features {
            for (i, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    rows.insert((feature.clone(), i), w);
                }
            }
        }
        for (prev, row) in self.transitions.iter().enumerate() {
            let name = if prev == START {
                format!("{TRANSITION_PREFIX}START")
            } else {
                format!("{TRANSITION_PREFIX}{}", BioLabel::from_index(prev))
            };
            for (i, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    rows.insert((name.clone(), i), w);
                }
            }
        }
        let mut out = format!("{MODEL_HEADER}\t{}\n", self.feature_template_version);
        for ((feature, label), w) in rows {
            // `{:?}` on f64 prints the shortest representation that round-trips.
            writeln!(out, "{feature}\t{}\t{w:?}", BioLabel::from_index(label)).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("sequence model", "empty file"))?;
        let version = header
            .strip_prefix(MODEL_HEADER)
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::parse("sequence model", "missing header"))?;
        if version != FEATURE_TEMPLATE_VERSION {
            return Err(Error::parse(
                "sequence model",
                format!("unsupported feature template `{version}`"),
            ));
        }
        let mut model = SequenceModel::zeros();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = || Error::parse("sequence model", format!("line {}: `{line}`", lineno + 2));
            let mut cols = line.rsplitn(3, '\t');
            let weight: f64 = cols.next().and_then(|w| w.parse().ok()).ok_or_else(bad)?;
            let label: BioLabel = cols.next().ok_or_else(bad)?.parse()?;
            let feature = cols.next().ok_or_else(bad)?;
            if !weight.is_finite() {
                return Err(bad());
            }
            match feature.strip_prefix(TRANSITION_PREFIX) {
                Some("START") => model.set_transition_weight(None, label, weight),
                Some(prev) => model.set_transition_weight(Some(prev.parse()?), label, weight),
                None => model.set_feature_weight(feature, label, weight),
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SequenceModel::from_text(&text)
    }
}

fn shape(word: &str) -> String {
    let mut out = String::new();
    for c in word.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if !out.ends_with(class) {
            out.push(class);
        }
    }
    out
}

fn position_bucket(i: usize) -> &'static str {
    match i {
        0 => "0",
        1 => "1",
        2 => "2",
        3..=5 => "3-5",
        6..=10 => "6-10",
        11..=20 => "11-20",
        _ => "21+",
    }
}

fn affix(word: &str, n: usize, prefix: bool) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() <= n {
        return word.to_string();
    }
    if prefix {
        chars[..n].iter().collect()
    } else {
        chars[chars.len() - n..].iter().collect()
    }
}

/// Feature strings for every token: bias, lowercase word, 3-character
/// prefix/suffix, word shape, digit flag, lowercase words in a ±2 window and
/// a position bucket.
pub(super) fn token_features(tokens: &[Token]) -> Vec<Vec<String>> {
    let lower: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    let context = |i: isize| -> &str {
        if i < 0 {
            "<s>"
        } else {
            lower.get(i as usize).map_or("</s>", String::as_str)
        }
    };
    tokens
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            let w = &lower[i];
            let ii = i as isize;
            let mut feats = vec![
                "bias".to_string(),
                format!("w={w}"),
                format!("p3={}", affix(w, 3, true)),
                format!("s3={}", affix(w, 3, false)),
                format!("shape={}", shape(&tok.text)),
                format!("w-2={}", context(ii - 2)),
                format!("w-1={}", context(ii - 1)),
                format!("w+1={}", context(ii + 1)),
                format!("w+2={}", context(ii + 2)),
                format!("pos={}", position_bucket(i)),
            ];
            if !tok.text.is_empty() && tok.text.chars().all(|c| c.is_ascii_digit()) {
                feats.push("digit".to_string());
            }
            feats
        })
        .collect()
}

/// Total score of a label sequence; `-inf` if it violates the BIO constraint.
pub fn sequence_score(emissions: &[[f64; NUM_LABELS]], transitions: &Transitions, labels: &[BioLabel]) -> f64 {
    let mut score = 0.0;
    let mut prev: Option<BioLabel> = None;
    for (e, &label) in emissions.iter().zip(labels) {
        if !label.may_follow(prev) {
            return f64::NEG_INFINITY;
        }
        score += transitions[prev.map_or(START, BioLabel::index)][label.index()] + e[label.index()];
        prev = Some(label);
    }
    score
}

/// Highest-scoring BIO-valid label sequence.
///
/// Among equal-score optima the result is the smallest sequence under
/// position-by-position comparison with [`BioLabel::tie_rank`]. A backward
/// pass computes the best suffix score for every (position, label); the
/// forward pass then picks the lowest-ranked label that still attains the
/// optimum.
pub fn viterbi(emissions: &[[f64; NUM_LABELS]], transitions: &Transitions) -> Vec<BioLabel> {
    let n = emissions.len();
    if n == 0 {
        return Vec::new();
    }
    let mut suffix = vec![[f64::NEG_INFINITY; NUM_LABELS]; n];
    suffix[n - 1] = emissions[n - 1];
    for i in (0..n - 1).rev() {
        for y in 0..NUM_LABELS {
            let from = BioLabel::from_index(y);
            let best_next = BioLabel::ALL
                .iter()
                .filter(|next| next.may_follow(Some(from)))
                .map(|next| transitions[y][next.index()] + suffix[i + 1][next.index()])
                .fold(f64::NEG_INFINITY, f64::max);
            suffix[i][y] = emissions[i][y] + best_next;
        }
    }

    let mut by_rank = BioLabel::ALL;
    by_rank.sort_by_key(|l| l.tie_rank());

    let mut labels = Vec::with_capacity(n);
    let mut prev: Option<BioLabel> = None;
    for row in &suffix {
        let row_idx = prev.map_or(START, BioLabel::index);
        let mut best: Option<(BioLabel, f64)> = None;
        for &label in &by_rank {
            if !label.may_follow(prev) {
                continue;
            }
            let score = transitions[row_idx][label.index()] + row[label.index()];
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((label, score));
            }
        }
        let (label, _) = best.expect("O is always allowed");
        labels.push(label);
        prev = Some(label);
    }
    labels
}
