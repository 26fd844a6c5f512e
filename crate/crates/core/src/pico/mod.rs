//! Population / Intervention / Outcome span labelling.
//!
//! A linear-chain model scores BIO label sequences with per-token feature
//! weights plus label-transition weights; decoding is exact Viterbi under the
//! hard BIO constraint, training is the averaged structured perceptron.

pub mod conll;
mod eval;
mod extract;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};

pub use eval::{evaluate, CategoryCounts, Evaluation, Scores};
pub use extract::{concepts_in_spans, pico_concepts, TypedConcept};
pub use model::{sequence_score, viterbi, Emissions, SequenceModel, Transitions, FEATURE_TEMPLATE_VERSION};
pub use train::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PicoCategory {
    Population,
    Intervention,
    Outcome,
}

impl PicoCategory {
    pub const ALL: [PicoCategory; 3] = [
        PicoCategory::Population,
        PicoCategory::Intervention,
        PicoCategory::Outcome,
    ];

    fn tag(self) -> &'static str {
        match self {
            PicoCategory::Population => "POP",
            PicoCategory::Intervention => "INT",
            PicoCategory::Outcome => "OUT",
        }
    }

    /// Single-letter code used by the span markup (`P`, `I`, `O`).
    pub fn letter(self) -> char {
        match self {
            PicoCategory::Population => 'P',
            PicoCategory::Intervention => 'I',
            PicoCategory::Outcome => 'O',
        }
    }
}

impl fmt::Display for PicoCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BioLabel {
    O,
    B(PicoCategory),
    I(PicoCategory),
}

pub const NUM_LABELS: usize = 7;

impl BioLabel {
    /// Every label in matrix-index order.
    pub const ALL: [BioLabel; NUM_LABELS] = [
        BioLabel::O,
        BioLabel::B(PicoCategory::Population),
        BioLabel::I(PicoCategory::Population),
        BioLabel::B(PicoCategory::Intervention),
        BioLabel::I(PicoCategory::Intervention),
        BioLabel::B(PicoCategory::Outcome),
        BioLabel::I(PicoCategory::Outcome),
    ];

    pub fn index(self) -> usize {
        match self {
            BioLabel::O => 0,
            BioLabel::B(PicoCategory::Population) => 1,
            BioLabel::I(PicoCategory::Population) => 2,
            BioLabel::B(PicoCategory::Intervention) => 3,
            BioLabel::I(PicoCategory::Intervention) => 4,
            BioLabel::B(PicoCategory::Outcome) => 5,
            BioLabel::I(PicoCategory::Outcome) => 6,
        }
    }

    pub fn from_index(i: usize) -> BioLabel {
        BioLabel::ALL[i]
    }

    /// Tie-break order between equally scored labels: `O` first, then the
    /// remaining labels in lexicographic order of their names.
    pub fn tie_rank(self) -> usize {
        match self {
            BioLabel::O => 0,
            BioLabel::B(PicoCategory::Intervention) => 1,
            BioLabel::B(PicoCategory::Outcome) => 2,
            BioLabel::B(PicoCategory::Population) => 3,
            BioLabel::I(PicoCategory::Intervention) => 4,
            BioLabel::I(PicoCategory::Outcome) => 5,
            BioLabel::I(PicoCategory::Population) => 6,
        }
    }

    pub fn category(self) -> Option<PicoCategory> {
        match self {
            BioLabel::O => None,
            BioLabel::B(c) | BioLabel::I(c) => Some(c),
        }
    }

    /// Whether `self` may directly follow `prev` (`None` = sequence start).
    pub fn may_follow(self, prev: Option<BioLabel>) -> bool {
        match self {
            BioLabel::I(c) => matches!(prev, Some(BioLabel::B(p)) | Some(BioLabel::I(p)) if p == c),
            _ => true,
        }
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioLabel::O => f.write_str("O"),
            BioLabel::B(c) => write!(f, "B-{}", c.tag()),
            BioLabel::I(c) => write!(f, "I-{}", c.tag()),
        }
    }
}

impl FromStr for BioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "O" {
            return Ok(BioLabel::O);
        }
        let (prefix, tag) = s
            .split_once('-')
            .ok_or_else(|| Error::parse("BIO label", s.to_string()))?;
        let category = match tag {
            "POP" | "P" | "PAR" => PicoCategory::Population,
            // Comparators are folded into interventions.
            "INT" | "I" | "COMP" | "C" => PicoCategory::Intervention,
            "OUT" | "O" => PicoCategory::Outcome,
            _ => return Err(Error::parse("BIO label", s.to_string())),
        };
        match prefix {
            "B" => Ok(BioLabel::B(category)),
            "I" => Ok(BioLabel::I(category)),
            _ => Err(Error::parse("BIO label", s.to_string())),
        }
    }
}

/// Checks that no `I-X` follows anything but `B-X` or `I-X`.
pub fn validate_bio(id: &str, labels: &[BioLabel]) -> Result<()> {
    let mut prev = None;
    for (i, &label) in labels.iter().enumerate() {
        if !label.may_follow(prev) {
            let before = prev.map_or_else(|| "start".to_string(), |p| p.to_string());
            return Err(Error::InvalidBio {
                sequence: id.to_string(),
                reason: format!("{label} at position {i} follows {before}"),
            });
        }
        prev = Some(label);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Byte offsets `[start, end)` into the source text.
    pub span: (usize, usize),
}

/// Unicode word segmentation with punctuation kept as separate tokens and
/// whitespace dropped.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_word_bound_indices()
        .filter(|(_, s)| !s.chars().all(char::is_whitespace))
        .map(|(start, s)| Token {
            text: s.to_string(),
            span: (start, start + s.len()),
        })
        .collect()
}

/// Gold or predicted labels over one token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub id: String,
    pub tokens: Vec<Token>,
    pub labels: Vec<BioLabel>,
}

impl LabeledSequence {
    /// Builds a sequence from bare words; spans assume single-space joining.
    pub fn from_words(id: impl Into<String>, words: &[&str], labels: Vec<BioLabel>) -> Self {
        let mut tokens = Vec::with_capacity(words.len());
        let mut offset = 0;
        for w in words {
            tokens.push(Token {
                text: w.to_string(),
                span: (offset, offset + w.len()),
            });
            offset += w.len() + 1;
        }
        LabeledSequence {
            id: id.into(),
            tokens,
            labels,
        }
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PicoSpan {
    pub category: PicoCategory,
    /// Byte offsets `[start, end)` from the first token start to the last token end.
    pub span: (usize, usize),
    /// Token indices `[first, last]` inclusive.
    pub tokens: (usize, usize),
    pub text: String,
}

/// Collapses maximal `B-X (I-X)*` runs into spans. `text` is the string the
/// token spans point into; an empty `text` yields spans with empty `text`.
pub fn labels_to_spans(text: &str, tokens: &[Token], labels: &[BioLabel]) -> Result<Vec<PicoSpan>> {
    if tokens.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} tokens vs {} labels",
            tokens.len(),
            labels.len()
        )));
    }
    validate_bio("<labels>", labels)?;
    let mut spans = Vec::new();
    let mut open: Option<(PicoCategory, usize)> = None;
    let close = |open: &mut Option<(PicoCategory, usize)>, last: usize, spans: &mut Vec<PicoSpan>| {
        if let Some((category, first)) = open.take() {
            let span = (tokens[first].span.0, tokens[last].span.1);
            spans.push(PicoSpan {
                category,
                span,
                tokens: (first, last),
                text: text.get(span.0..span.1).unwrap_or_default().to_string(),
            });
        }
    };
    for (i, label) in labels.iter().enumerate() {
        match label {
            BioLabel::B(c) => {
                if i > 0 {
                    close(&mut open, i - 1, &mut spans);
                }
                open = Some((*c, i));
            }
            BioLabel::I(_) => {}
            BioLabel::O => {
                if i > 0 {
                    close(&mut open, i - 1, &mut spans);
                }
            }
        }
    }
    if !labels.is_empty() {
        close(&mut open, labels.len() - 1, &mut spans);
    }
    Ok(spans)
}

/// Inverse of [`labels_to_spans`] using the spans' token ranges.
pub fn spans_to_labels(len: usize, spans: &[PicoSpan]) -> Result<Vec<BioLabel>> {
    let mut labels = vec![BioLabel::O; len];
    for span in spans {
        let (first, last) = span.tokens;
        if first > last || last >= len {
            return Err(Error::InvalidInput(format!("span tokens {first}..={last} out of range")));
        }
        if labels[first..=last].iter().any(|l| *l != BioLabel::O) {
            return Err(Error::InvalidInput("overlapping spans".into()));
        }
        labels[first] = BioLabel::B(span.category);
        for label in &mut labels[first + 1..=last] {
            *label = BioLabel::I(span.category);
        }
    }
    Ok(labels)
}
