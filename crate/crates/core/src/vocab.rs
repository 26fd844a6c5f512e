//! Dictionary concept recognition.
//!
//! Text and vocabulary variants are both reduced to sequences of case-folded
//! alphanumeric words, so punctuation differences ("covid-19" vs "covid 19")
//! never block a match and matches always start and end on word boundaries.
//! Matching walks a word-level trie built once per vocabulary and takes the
//! leftmost-longest match at every position.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ConceptId = String;

/// Byte span `[start, end)` of one alphanumeric word.
pub fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            spans.push((s, i));
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Case-folded words of `text`.
pub fn normalized_words(text: &str) -> Vec<String> {
    word_spans(text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub preferred_term: String,
    pub is_mesh: bool,
    /// Case-folded surface variants.
    pub variants: BTreeSet<String>,
    #[serde(default)]
    pub mesh_tree_numbers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    concepts: BTreeMap<ConceptId, Concept>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::default()
    }

    /// Parses the TSV format `concept_id  is_mesh  preferred_term  variant`,
    /// one variant per row. A header row starting with `concept_id` and `#`
    /// comment lines are ignored.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') || line.starts_with("concept_id\t") {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 4 {
                return Err(Error::parse(
                    "vocabulary TSV",
                    format!("line {}: expected 4 columns, got {}", lineno + 1, cols.len()),
                ));
            }
            let is_mesh = match cols[1].trim() {
                "1" | "true" | "TRUE" | "yes" => true,
                "0" | "false" | "FALSE" | "no" => false,
                other => {
                    return Err(Error::parse(
                        "vocabulary TSV",
                        format!("line {}: bad is_mesh flag `{other}`", lineno + 1),
                    ))
                }
            };
            vocab.add_variant(cols[0].trim(), is_mesh, cols[2].trim(), cols[3])?;
        }
        Ok(vocab)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_tsv(&text)
    }

    pub fn add_variant(&mut self, id: &str, is_mesh: bool, preferred_term: &str, variant: &str) -> Result<()> {
        if id.is_empty() {
            return Err(Error::InvalidInput("empty concept id".into()));
        }
        let folded = variant.trim().to_lowercase();
        if normalized_words(&folded).is_empty() {
            return Err(Error::InvalidInput(format!(
                "variant `{variant}` of {id} has no word characters"
            )));
        }
        let concept = self.concepts.entry(id.to_string()).or_insert_with(|| Concept {
            id: id.to_string(),
            preferred_term: preferred_term.to_string(),
            is_mesh,
            variants: BTreeSet::new(),
            mesh_tree_numbers: Vec::new(),
        });
        concept.variants.insert(folded);
        Ok(())
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptOccurrence {
    pub concept_id: ConceptId,
    /// Case-folded text at `span`.
    pub surface: String,
    /// Byte offsets `[start, end)` into the tagged text.
    pub span: (usize, usize),
    pub is_mesh: bool,
}

/// One match before disambiguation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateMatch {
    pub span: (usize, usize),
    /// Concepts sharing the matched variant, sorted by id.
    pub candidates: Vec<ConceptId>,
}

#[derive(Debug, Default, Clone)]
struct TrieNode {
    children: HashMap<u32, usize>,
    concepts: Vec<usize>,
}

/// Compiled matcher over a [`Vocabulary`].
#[derive(Debug, Clone)]
pub struct Tagger {
    ids: Vec<ConceptId>,
    mesh: HashMap<ConceptId, bool>,
    words: HashMap<String, u32>,
    nodes: Vec<TrieNode>,
    priorities: HashMap<ConceptId, usize>,
}

impl Tagger {
    pub fn new(vocab: &Vocabulary) -> Self {
        let mut tagger = Tagger {
            ids: Vec::with_capacity(vocab.len()),
            mesh: HashMap::with_capacity(vocab.len()),
            words: HashMap::new(),
            nodes: vec![TrieNode::default()],
            priorities: HashMap::new(),
        };
        for (idx, concept) in vocab.concepts().enumerate() {
            tagger.ids.push(concept.id.clone());
            tagger.mesh.insert(concept.id.clone(), concept.is_mesh);
            for variant in &concept.variants {
                let mut node = 0;
                for word in normalized_words(variant) {
                    let next_word = tagger.words.len() as u32;
                    let word_id = *tagger.words.entry(word).or_insert(next_word);
                    node = match tagger.nodes[node].children.get(&word_id) {
                        Some(&child) => child,
                        None => {
                            tagger.nodes.push(TrieNode::default());
                            let child = tagger.nodes.len() - 1;
                            tagger.nodes[node].children.insert(word_id, child);
                            child
                        }
                    };
                }
                let outputs = &mut tagger.nodes[node].concepts;
                if !outputs.contains(&idx) {
                    outputs.push(idx);
                }
            }
        }
        tagger
    }

    /// Sets the corpus frequencies used to pick among concepts that share a
    /// variant: higher frequency wins, ties go to the smaller concept id.
    pub fn with_priorities(mut self, priorities: HashMap<ConceptId, usize>) -> Self {
        self.priorities = priorities;
        self
    }

    /// Leftmost-longest, non-overlapping matches with all candidate concepts.
    pub fn candidate_matches(&self, text: &str) -> Vec<CandidateMatch> {
        let spans = word_spans(text);
        let ids: Vec<Option<u32>> = spans
            .iter()
            .map(|&(s, e)| self.words.get(&text[s..e].to_lowercase()).copied())
            .collect();

        let mut matches = Vec::new();
        let mut i = 0;
        while i < spans.len() {
            let mut node = 0;
            let mut longest: Option<(usize, usize)> = None;
            for (j, word) in ids.iter().enumerate().skip(i) {
                let Some(next) = word.and_then(|w| self.nodes[node].children.get(&w)) else {
                    break;
                };
                node = *next;
                if !self.nodes[node].concepts.is_empty() {
                    longest = Some((j, node));
                }
            }
            match longest {
                Some((j, node)) => {
                    let mut candidates: Vec<ConceptId> = self.nodes[node]
                        .concepts
                        .iter()
                        .map(|&c| self.ids[c].clone())
                        .collect();
                    candidates.sort();
                    matches.push(CandidateMatch {
                        span: (spans[i].0, spans[j].1),
                        candidates,
                    });
                    i = j + 1;
                }
                None => i += 1,
            }
        }
        matches
    }

    pub fn tag(&self, text: &str) -> Vec<ConceptOccurrence> {
        self.candidate_matches(text)
            .into_iter()
            .map(|m| {
                let concept_id = self.resolve(&m.candidates).clone();
                let is_mesh = self.is_mesh(&concept_id);
                ConceptOccurrence {
                    surface: text[m.span.0..m.span.1].to_lowercase(),
                    span: m.span,
                    concept_id,
                    is_mesh,
                }
            })
            .collect()
    }

    fn resolve<'a>(&self, candidates: &'a [ConceptId]) -> &'a ConceptId {
        // `candidates` is sorted, so max_by_key's last-max rule needs reversing
        // to prefer the smaller id on ties.
        candidates
            .iter()
            .rev()
            .max_by_key(|id| self.priorities.get(*id).copied().unwrap_or(0))
            .expect("a match has at least one candidate")
    }

    pub fn is_mesh(&self, concept_id: &str) -> bool {
        self.mesh.get(concept_id).copied().unwrap_or(false)
    }

    /// Document frequencies from unambiguous matches only, suitable for
    /// [`Tagger::with_priorities`].
    pub fn disambiguation_frequencies<'a, I>(&self, texts: I) -> HashMap<ConceptId, usize>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut freq = HashMap::new();
        for text in texts {
            let seen: HashSet<ConceptId> = self
                .candidate_matches(text)
                .into_iter()
                .filter(|m| m.candidates.len() == 1)
                .flat_map(|m| m.candidates)
                .collect();
            for id in seen {
                *freq.entry(id).or_insert(0) += 1;
            }
        }
        freq
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptProfile {
    pub concept_id: ConceptId,
    pub display_label: String,
    /// Number of distinct documents containing the concept.
    pub corpus_frequency: usize,
}

/// Display label = most frequent surface form (ties: lexicographically
/// smallest); frequency = number of documents containing the concept.
pub fn build_profiles<'a, I>(corpus: I) -> BTreeMap<ConceptId, ConceptProfile>
where
    I: IntoIterator<Item = &'a [ConceptOccurrence]>,
{
    let mut surfaces: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut doc_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for occurrences in corpus {
        let mut in_doc: BTreeSet<&str> = BTreeSet::new();
        for occ in occurrences {
            *surfaces
                .entry(&occ.concept_id)
                .or_default()
                .entry(&occ.surface)
                .or_insert(0) += 1;
            in_doc.insert(&occ.concept_id);
        }
        for id in in_doc {
            *doc_freq.entry(id).or_insert(0) += 1;
        }
    }
    surfaces
        .into_iter()
        .map(|(id, forms)| {
            // BTreeMap iterates labels ascending; keep the first maximum.
            let (label, _) = forms.iter().fold(("", 0usize), |best, (&label, &n)| {
                if n > best.1 {
                    (label, n)
                } else {
                    best
                }
            });
            let profile = ConceptProfile {
                concept_id: id.to_string(),
                display_label: label.to_string(),
                corpus_frequency: doc_freq[id],
            };
            (id.to_string(), profile)
        })
        .collect()
}

/// The `n` concepts with the highest document frequency (ties: smaller id).
pub fn top_frequent(profiles: &BTreeMap<ConceptId, ConceptProfile>, n: usize) -> BTreeSet<ConceptId> {
    let mut ranked: Vec<&ConceptProfile> = profiles.values().collect();
    ranked.sort_by(|a, b| {
        b.corpus_frequency
            .cmp(&a.corpus_frequency)
            .then_with(|| a.concept_id.cmp(&b.concept_id))
    });
    ranked.into_iter().take(n).map(|p| p.concept_id.clone()).collect()
}

/// Case-insensitive stopword list, one term per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    terms: HashSet<String>,
}

impl StopList {
    pub fn from_text(text: &str) -> Self {
        StopList {
            terms: text
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(StopList::from_text(&text))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(&term.trim().to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Everything needed to turn occurrences into analysis terms.
#[derive(Debug, Clone, Copy)]
pub struct TermFilter<'a> {
    pub profiles: &'a BTreeMap<ConceptId, ConceptProfile>,
    pub stoplist: &'a StopList,
    pub top_frequent: &'a BTreeSet<ConceptId>,
}

impl TermFilter<'_> {
    pub fn label<'o>(&'o self, occ: &'o ConceptOccurrence) -> &'o str {
        self.profiles
            .get(&occ.concept_id)
            .map(|p| p.display_label.as_str())
            .unwrap_or(&occ.surface)
    }

    pub fn keeps(&self, occ: &ConceptOccurrence) -> bool {
        !self.stoplist.contains(self.label(occ)) && !self.top_frequent.contains(&occ.concept_id)
    }

    /// Surviving occurrences with multiplicity, in text order.
    pub fn retain<'o>(&self, occurrences: &'o [ConceptOccurrence]) -> Vec<&'o ConceptOccurrence> {
        occurrences.iter().filter(|o| self.keeps(o)).collect()
    }

    /// Display labels of the surviving occurrences, with multiplicity.
    pub fn bag(&self, occurrences: &[ConceptOccurrence]) -> Vec<String> {
        self.retain(occurrences)
            .into_iter()
            .map(|o| self.label(o).to_string())
            .collect()
    }
}

/// Drops stopword-labelled and top-frequent concepts, then deduplicates
/// preserving first-occurrence order.
pub fn final_terms(occurrences: &[ConceptOccurrence], filter: &TermFilter<'_>) -> Vec<ConceptId> {
    let mut seen = HashSet::new();
    filter
        .retain(occurrences)
        .into_iter()
        .filter(|o| seen.insert(o.concept_id.as_str()))
        .map(|o| o.concept_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abdomen_vocab() -> Vocabulary {
        let mut v = Vocabulary::new();
        for variant in [
            "abdominal distension",
            "abdominal distention",
            "bloating",
            "distended abdomens",
            "swelling of abdomen",
        ] {
            v.add_variant("C0000731", false, "Abdomen distended", variant).unwrap();
        }
        v.add_variant("C1443924", false, "Severe diarrhea", "severe diarrhea").unwrap();
        v.add_variant("C0011991", true, "Diarrhea", "diarrhea").unwrap();
        v
    }

    #[test]
    fn empty_text_has_no_occurrences() {
        assert!(Tagger::new(&abdomen_vocab()).tag("").is_empty());
    }

    #[test]
    fn variants_unify_to_one_concept() {
        let tagger = Tagger::new(&abdomen_vocab());
        let text = "swelling of abdomen and bloating";
        let occ = tagger.tag(text);
        assert_eq!(occ.len(), 2);
        assert!(occ.iter().all(|o| o.concept_id == "C0000731"));
        assert_eq!(occ[0].surface, "swelling of abdomen");
        assert_eq!(&text[occ[1].span.0..occ[1].span.1], "bloating");
    }

    #[test]
    fn longest_match_wins() {
        let tagger = Tagger::new(&abdomen_vocab());
        let occ = tagger.tag("Severe diarrhea was reported");
        assert_eq!(occ.len(), 1);
        assert_eq!(occ[0].concept_id, "C1443924");
        assert_eq!(occ[0].surface, "severe diarrhea");
    }

    #[test]
    fn matches_respect_word_boundaries() {
        let mut v = Vocabulary::new();
        v.add_variant("C1", true, "to", "to").unwrap();
        v.add_variant("C2", true, "covid", "covid-19").unwrap();
        let tagger = Tagger::new(&v);
        assert!(tagger.tag("tomorrow").is_empty());
        let occ = tagger.tag("COVID 19, due to covid-19.");
        let ids: Vec<&str> = occ.iter().map(|o| o.concept_id.as_str()).collect();
        assert_eq!(ids, ["C2", "C1", "C2"]);
        assert_eq!(occ[0].surface, "covid 19");
    }

    #[test]
    fn ambiguous_variant_uses_priority_then_smaller_id() {
        let mut v = Vocabulary::new();
        v.add_variant("C0003415", true, "Artificial Intelligence", "ai").unwrap();
        v.add_variant("C0016627", true, "Influenza in Birds", "ai").unwrap();
        v.add_variant("C0016627", true, "Influenza in Birds", "avian influenza").unwrap();
        let tagger = Tagger::new(&v);
        assert_eq!(tagger.tag("ai")[0].concept_id, "C0003415");

        let texts = ["avian influenza and AI"];
        let freq = tagger.disambiguation_frequencies(texts.iter().copied());
        assert_eq!(freq.get("C0016627"), Some(&1));
        assert_eq!(freq.get("C0003415"), None);
        let tagger = tagger.with_priorities(freq);
        let occ = tagger.tag(texts[0]);
        assert!(occ.iter().all(|o| o.concept_id == "C0016627"));
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let tsv = "concept_id\tis_mesh\tpreferred_term\tvariant\n\
                   C1\t1\tColon\tColon\n\
                   C1\t1\tColon\tcolon structure\n";
        let v = Vocabulary::from_tsv(tsv).unwrap();
        let c = v.concept("C1").unwrap();
        assert!(c.is_mesh);
        assert_eq!(c.variants.iter().collect::<Vec<_>>(), ["colon", "colon structure"]);
        assert!(Vocabulary::from_tsv("C1\tmaybe\tX\tx\n").is_err());
        assert!(Vocabulary::from_tsv("C1\t1\tX\n").is_err());
    }

    fn occ(id: &str, surface: &str) -> ConceptOccurrence {
        ConceptOccurrence {
            concept_id: id.into(),
            surface: surface.into(),
            span: (0, 0),
            is_mesh: false,
        }
    }

    #[test]
    fn display_label_is_most_frequent_surface() {
        let mut doc = vec![occ("C1", "colon"); 5];
        doc.push(occ("C1", "colon structure"));
        let profiles = build_profiles([doc.as_slice()]);
        assert_eq!(profiles["C1"].display_label, "colon");
    }

    #[test]
    fn display_label_tie_goes_to_smallest() {
        let doc = vec![occ("C1", "y"), occ("C1", "x"), occ("C1", "y"), occ("C1", "x")];
        let profiles = build_profiles([doc.as_slice()]);
        assert_eq!(profiles["C1"].display_label, "x");
    }

    #[test]
    fn corpus_frequency_counts_documents() {
        let docs = [
            vec![occ("C1", "a"), occ("C1", "a")],
            vec![occ("C1", "a")],
            vec![occ("C1", "a"), occ("C2", "b")],
        ];
        let profiles = build_profiles(docs.iter().map(Vec::as_slice));
        assert_eq!(profiles["C1"].corpus_frequency, 3);
        assert_eq!(profiles["C2"].corpus_frequency, 1);
    }

    #[test]
    fn final_terms_drop_stopwords_and_dedupe() {
        let doc = vec![occ("S", "study"), occ("T", "to"), occ("E", "establish"), occ("E", "establish")];
        let profiles = build_profiles([doc.as_slice()]);
        let stoplist = StopList::from_text("to\nStudy\n");
        let top = BTreeSet::new();
        let filter = TermFilter {
            profiles: &profiles,
            stoplist: &stoplist,
            top_frequent: &top,
        };
        assert_eq!(final_terms(&doc, &filter), ["E"]);
        assert_eq!(filter.bag(&doc), ["establish", "establish"]);
        assert!(final_terms(&[], &filter).is_empty());
    }

    #[test]
    fn top_frequent_cutoff_is_exact() {
        // Concept k appears in (200 - k) documents, so rank == k.
        let mut profiles = BTreeMap::new();
        for k in 1..=150usize {
            let id = format!("K{k:03}");
            profiles.insert(
                id.clone(),
                ConceptProfile {
                    concept_id: id,
                    display_label: format!("term{k}"),
                    corpus_frequency: 200 - k,
                },
            );
        }
        let top = top_frequent(&profiles, 100);
        assert_eq!(top.len(), 100);
        assert!(top.contains("K100"));
        assert!(!top.contains("K101"));

        let doc = vec![occ("K100", "term100"), occ("K101", "term101")];
        let stoplist = StopList::default();
        let filter = TermFilter {
            profiles: &profiles,
            stoplist: &stoplist,
            top_frequent: &top,
        };
        assert_eq!(final_terms(&doc, &filter), ["K101"]);
    }
}
