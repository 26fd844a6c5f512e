use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{labels_to_spans, tokenize, PicoCategory, PicoSpan, SequenceModel};
use crate::error::Result;
use crate::vocab::{ConceptId, Tagger};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypedConcept {
    pub concept_id: ConceptId,
    pub category: PicoCategory,
}

/// MeSH concepts found inside each span, typed by the span's category and
/// deduplicated per (concept, category) in order of first appearance.
pub fn concepts_in_spans(tagger: &Tagger, text: &str, spans: &[PicoSpan]) -> Vec<TypedConcept> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for span in spans {
        let Some(inner) = text.get(span.span.0..span.span.1) else {
            continue;
        };
        for occ in tagger.tag(inner) {
            if !occ.is_mesh {
                continue;
            }
            let typed = TypedConcept {
                concept_id: occ.concept_id,
                category: span.category,
            };
            if seen.insert(typed.clone()) {
                out.push(typed);
            }
        }
    }
    out
}

/// Decodes PICO spans in `text` and returns the typed MeSH concepts in them.
pub fn pico_concepts(model: &SequenceModel, tagger: &Tagger, text: &str) -> Result<(Vec<PicoSpan>, Vec<TypedConcept>)> {
    let tokens = tokenize(text);
    let labels = model.decode(&tokens);
    let spans = labels_to_spans(text, &tokens, &labels)?;
    let concepts = concepts_in_spans(tagger, text, &spans);
    Ok((spans, concepts))
}
