//! The analysis pipeline over an ingested corpus and the view payloads built
//! from it.
//!
//! A [`Workspace`] tags every document once, derives concept profiles and
//! topic-model bags, decodes PICO spans, and indexes titles and text for
//! search. View payloads for a document collection are then pure functions
//! of the workspace.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, DocFilter};
use crate::error::{Error, Result};
use crate::keyness::{concept_cloud, ConceptCloud, DEFAULT_CLOUD_SIZE};
use crate::pico::{self, PicoSpan, SequenceModel, TypedConcept};
use crate::relations::{build_relations, to_sankey, SankeyGraph, SankeyOptions, TypedConceptPair};
use crate::search::{InvertedIndex, SearchHit};
use crate::topics::{self, project_2d, ConceptBag, MapTopic, TopicMap2D, TopicModel, DEFAULT_TOPIC_THRESHOLD, DEFAULT_TOP_N};
use crate::vocab::{build_profiles, top_frequent, ConceptId, ConceptOccurrence, ConceptProfile, StopList, Tagger, TermFilter, Vocabulary};

pub const SETTINGS_FILE: &str = "analysis.json";

/// Settings that must agree between topic-model training and serving; saved
/// next to the topic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    /// Concepts among the most document-frequent this many are excluded from
    /// topic and keyness terms.
    pub top_frequent: usize,
    pub fold_in_iterations: usize,
    pub fold_in_seed: u64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            top_frequent: 100,
            fold_in_iterations: 200,
            fold_in_seed: 0,
        }
    }
}

impl AnalysisSettings {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(SETTINGS_FILE);
        fs::write(&path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(&path, e))
    }

    /// Reads saved settings, or the defaults when none were saved.
    pub fn load_or_default(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(SETTINGS_FILE);
        if !path.exists() {
            return Ok(AnalysisSettings::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DocumentPico {
    pub spans: Vec<PicoSpan>,
    pub concepts: Vec<TypedConcept>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub doc_id: String,
    pub score: f64,
    pub matched_terms: BTreeSet<String>,
    pub title: String,
    pub year: Option<i32>,
    pub source: String,
    pub journal: Option<String>,
    pub authors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollectionSource {
    SearchResults { query: String },
    Briefcase { briefcase_id: String, version: u64 },
    Documents,
}

/// The set of documents the views are computed over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveCollection {
    pub source: CollectionSource,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectedTopic {
    #[serde(flatten)]
    pub topic: MapTopic,
    /// Mean weight of the topic over the collection.
    pub selection_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicView {
    pub threshold: f64,
    pub topics: Vec<SelectedTopic>,
    /// Collection documents without concept terms, left out of the mean.
    pub skipped_docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DashboardPayload {
    pub collection: ActiveCollection,
    pub sankey: SankeyGraph,
    /// `None` when no topic model is loaded.
    pub topics: Option<TopicView>,
    /// Documents whose concept cloud can be requested.
    pub clouds: Vec<String>,
}

pub struct Workspace {
    corpus: CorpusStore,
    vocabulary: Vocabulary,
    stoplist: StopList,
    tagger: Tagger,
    settings: AnalysisSettings,
    profiles: BTreeMap<ConceptId, ConceptProfile>,
    top_frequent: BTreeSet<ConceptId>,
    occurrences: BTreeMap<String, Vec<ConceptOccurrence>>,
    bags: BTreeMap<String, Vec<String>>,
    pico_model: SequenceModel,
    pico: BTreeMap<String, DocumentPico>,
    index: InvertedIndex,
    topic_model: Option<TopicModel>,
    topic_map: Option<TopicMap2D>,
}

impl Workspace {
    pub fn new(
        corpus: CorpusStore,
        vocabulary: Vocabulary,
        stoplist: StopList,
        pico_model: SequenceModel,
        settings: AnalysisSettings,
    ) -> Result<Self> {
        let texts: BTreeMap<String, String> = corpus
            .documents()
            .filter_map(|d| corpus.analysis_text(&d.doc_id).ok().map(|a| (d.doc_id.clone(), a.text)))
            .collect();

        let base = Tagger::new(&vocabulary);
        let priorities = base.disambiguation_frequencies(texts.values().map(String::as_str));
        let tagger = base.with_priorities(priorities);

        let occurrences: BTreeMap<String, Vec<ConceptOccurrence>> =
            texts.iter().map(|(id, text)| (id.clone(), tagger.tag(text))).collect();
        let profiles = build_profiles(occurrences.values().map(Vec::as_slice));
        let top = top_frequent(&profiles, settings.top_frequent);
        let filter = TermFilter {
            profiles: &profiles,
            stoplist: &stoplist,
            top_frequent: &top,
        };
        let bags = occurrences.iter().map(|(id, occ)| (id.clone(), filter.bag(occ))).collect();

        let mut pico = BTreeMap::new();
        for (id, text) in &texts {
            let (spans, concepts) = pico::pico_concepts(&pico_model, &tagger, text)?;
            pico.insert(id.clone(), DocumentPico { spans, concepts });
        }

        let index = InvertedIndex::build(&corpus);
        tracing::info!(
            documents = corpus.len(),
            concepts = profiles.len(),
            "workspace ready"
        );
        Ok(Workspace {
            corpus,
            vocabulary,
            stoplist,
            tagger,
            settings,
            profiles,
            top_frequent: top,
            occurrences,
            bags,
            pico_model,
            pico,
            index,
            topic_model: None,
            topic_map: None,
        })
    }

    /// Attaches a trained topic model and precomputes its 2-D map.
    pub fn with_topic_model(mut self, model: TopicModel) -> Self {
        self.topic_map = Some(project_2d(&model, DEFAULT_TOP_N));
        self.topic_model = Some(model);
        self
    }

    pub fn corpus(&self) -> &CorpusStore {
        &self.corpus
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn stoplist(&self) -> &StopList {
        &self.stoplist
    }

    pub fn tagger(&self) -> &Tagger {
        &self.tagger
    }

    pub fn settings(&self) -> &AnalysisSettings {
        &self.settings
    }

    pub fn profiles(&self) -> &BTreeMap<ConceptId, ConceptProfile> {
        &self.profiles
    }

    pub fn top_frequent(&self) -> &BTreeSet<ConceptId> {
        &self.top_frequent
    }

    pub fn pico_model(&self) -> &SequenceModel {
        &self.pico_model
    }

    pub fn topic_model(&self) -> Option<&TopicModel> {
        self.topic_model.as_ref()
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn occurrences(&self, doc_id: &str) -> Option<&[ConceptOccurrence]> {
        self.occurrences.get(doc_id).map(Vec::as_slice)
    }

    pub fn pico(&self, doc_id: &str) -> Option<&DocumentPico> {
        self.pico.get(doc_id)
    }

    /// Display label of a concept, falling back to its preferred term.
    pub fn label(&self, concept_id: &str) -> String {
        self.profiles
            .get(concept_id)
            .map(|p| p.display_label.clone())
            .or_else(|| self.vocabulary.concept(concept_id).map(|c| c.preferred_term.clone()))
            .unwrap_or_else(|| concept_id.to_string())
    }

    /// Topic-model input: one bag per document with analysable text.
    pub fn concept_bags(&self) -> Vec<ConceptBag> {
        self.bags
            .iter()
            .map(|(id, tokens)| ConceptBag::new(id.clone(), tokens.iter().cloned()))
            .collect()
    }

    pub fn bag(&self, doc_id: &str) -> Option<&[String]> {
        self.bags.get(doc_id).map(Vec::as_slice)
    }

    pub fn search(&self, query: &str, top_k: usize, filter: &DocFilter) -> Result<Vec<SearchResult>> {
        let allowed: Option<BTreeSet<String>> = if filter.is_empty() {
            None
        } else {
            Some(self.corpus.filter(&self.corpus.ids(), filter).into_iter().collect())
        };
        let hits = self.index.search(query, &self.stoplist, top_k, allowed.as_ref())?;
        Ok(hits
            .into_iter()
            .map(|SearchHit { doc_id, score, matched_terms }| {
                let doc = self.corpus.get(&doc_id).expect("indexed documents are stored");
                SearchResult {
                    title: doc.title.clone(),
                    year: doc.year,
                    source: doc.source.clone(),
                    journal: doc.journal.clone(),
                    authors: doc.authors.clone(),
                    doc_id,
                    score,
                    matched_terms,
                }
            })
            .collect())
    }

    /// Ids of every search hit, as an active collection.
    pub fn search_collection(&self, query: &str, top_k: usize, filter: &DocFilter) -> Result<ActiveCollection> {
        Ok(ActiveCollection {
            source: CollectionSource::SearchResults {
                query: query.to_string(),
            },
            doc_ids: self.search(query, top_k, filter)?.into_iter().map(|r| r.doc_id).collect(),
        })
    }

    fn check_collection<S: AsRef<str>>(&self, doc_ids: &[S]) -> Result<()> {
        if doc_ids.is_empty() {
            return Err(Error::EmptyCollection);
        }
        match doc_ids.iter().find(|d| !self.corpus.contains(d.as_ref())) {
            Some(d) => Err(Error::UnknownDocument(d.as_ref().to_string())),
            None => Ok(()),
        }
    }

    pub fn relations<S: AsRef<str>>(&self, doc_ids: &[S]) -> Result<Vec<TypedConceptPair>> {
        self.check_collection(doc_ids)?;
        Ok(build_relations(doc_ids.iter().map(|d| {
            let concepts = self.pico.get(d.as_ref()).map_or(&[][..], |p| p.concepts.as_slice());
            (d.as_ref(), concepts)
        })))
    }

    pub fn sankey<S: AsRef<str>>(&self, doc_ids: &[S], options: &SankeyOptions) -> Result<SankeyGraph> {
        let relations = self.relations(doc_ids)?;
        Ok(self.sankey_from(&relations, options))
    }

    /// Sankey graph from relations computed earlier, labelled from the vocabulary.
    pub fn sankey_from(&self, relations: &[TypedConceptPair], options: &SankeyOptions) -> SankeyGraph {
        to_sankey(relations, options, |id| self.label(id))
    }

    /// Doc-topic row of a document: its training row, or a fold-in estimate.
    /// `None` for documents without concept terms.
    pub fn doc_topic_row(&self, doc_id: &str) -> Option<Vec<f64>> {
        let model = self.topic_model.as_ref()?;
        if let Some(row) = model.doc_row(doc_id) {
            return Some(row.to_vec());
        }
        let bag = self.bags.get(doc_id)?;
        let folded = model.fold_in(bag, self.settings.fold_in_iterations, self.settings.fold_in_seed);
        (!folded.flagged).then_some(folded.row)
    }

    /// Topics whose mean weight over the collection exceeds `threshold`,
    /// placed on the global topic map.
    pub fn topics<S: AsRef<str>>(&self, doc_ids: &[S], threshold: f64) -> Result<Option<TopicView>> {
        self.check_collection(doc_ids)?;
        let (Some(_), Some(map)) = (&self.topic_model, &self.topic_map) else {
            return Ok(None);
        };
        let mut rows = Vec::new();
        let mut skipped_docs = Vec::new();
        for d in doc_ids {
            match self.doc_topic_row(d.as_ref()) {
                Some(row) => rows.push(row),
                None => skipped_docs.push(d.as_ref().to_string()),
            }
        }
        let selected = if rows.is_empty() {
            Vec::new()
        } else {
            topics::topics_for_rows(&rows, threshold)?
        };
        let ids: Vec<usize> = selected.iter().map(|(k, _)| *k).collect();
        let topics = map
            .restrict(&ids)
            .topics
            .into_iter()
            .zip(&selected)
            .map(|(topic, &(_, weight))| SelectedTopic {
                topic,
                selection_weight: weight,
            })
            .collect();
        Ok(Some(TopicView {
            threshold,
            topics,
            skipped_docs,
        }))
    }

    /// Concept cloud of `doc_id` against the other documents of the collection.
    pub fn cloud<S: AsRef<str>>(&self, doc_id: &str, doc_ids: &[S]) -> Result<ConceptCloud> {
        self.check_collection(doc_ids)?;
        if !doc_ids.iter().any(|d| d.as_ref() == doc_id) {
            return Err(Error::InvalidInput(format!("`{doc_id}` is not in the collection")));
        }
        let bags: BTreeMap<String, Vec<&str>> = doc_ids
            .iter()
            .map(|d| {
                let bag = self.bags.get(d.as_ref()).map(|b| b.iter().map(String::as_str).collect()).unwrap_or_default();
                (d.as_ref().to_string(), bag)
            })
            .collect();
        concept_cloud(doc_id, &bags, DEFAULT_CLOUD_SIZE)
    }

    pub fn dashboard(&self, collection: ActiveCollection, options: &SankeyOptions, threshold: f64) -> Result<DashboardPayload> {
        let relations = self.relations(&collection.doc_ids)?;
        self.dashboard_from(collection, &relations, options, threshold)
    }

    /// Like [`Workspace::dashboard`], reusing relations of the same collection.
    pub fn dashboard_from(
        &self,
        collection: ActiveCollection,
        relations: &[TypedConceptPair],
        options: &SankeyOptions,
        threshold: f64,
    ) -> Result<DashboardPayload> {
        let sankey = self.sankey_from(relations, options);
        let topics = self.topics(&collection.doc_ids, threshold)?;
        let clouds = collection
            .doc_ids
            .iter()
            .filter(|d| self.cloud(d, &collection.doc_ids).is_ok())
            .cloned()
            .collect();
        Ok(DashboardPayload {
            collection,
            sankey,
            topics,
            clouds,
        })
    }
}

/// Default threshold for [`Workspace::topics`].
pub const TOPIC_THRESHOLD: f64 = DEFAULT_TOPIC_THRESHOLD;
