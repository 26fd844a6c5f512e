//! Document store: ingestion of JSONL/CSV corpus dumps, normalization,
//! on-disk persistence and filtered access.
//!
//! The store is a single directory holding `documents.jsonl`, rewritten in
//! `doc_id` order after every ingest so identical inputs always produce
//! identical bytes on disk.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DOCUMENTS_FILE: &str = "documents.jsonl";

const MIN_YEAR: i32 = 1900;
const MAX_YEAR: i32 = 2100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    #[serde(default)]
    pub abstract_text: Option<String>,
    #[serde(default)]
    pub body_paragraphs: Vec<String>,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub journal: Option<String>,
    #[serde(default)]
    pub license: Option<String>,
    #[serde(default)]
    pub url: Option<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            title: title.into(),
            abstract_text: None,
            body_paragraphs: Vec::new(),
            authors: Vec::new(),
            source: String::new(),
            year: None,
            journal: None,
            license: None,
            url: None,
        }
    }

    pub fn with_abstract(mut self, text: impl Into<String>) -> Self {
        self.abstract_text = Some(text.into());
        self
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = Some(year);
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn with_paragraphs<I, S>(mut self, paragraphs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.body_paragraphs = paragraphs.into_iter().map(Into::into).collect();
        self
    }

    fn has_abstract(&self) -> bool {
        self.abstract_text
            .as_deref()
            .is_some_and(|a| !a.trim().is_empty())
    }

    /// True if [`CorpusStore::analysis_text`] can produce text for this document.
    pub fn is_analyzable(&self) -> bool {
        self.has_abstract() || !self.body_paragraphs.is_empty()
    }

    /// Splits every paragraph on blank lines, trims, and drops empty blocks.
    fn normalize(mut self) -> Result<Self> {
        self.doc_id = self.doc_id.trim().to_string();
        if self.doc_id.is_empty() {
            return Err(Error::InvalidInput("empty doc_id".into()));
        }
        if let Some(year) = self.year {
            if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
                return Err(Error::InvalidInput(format!(
                    "year {year} outside [{MIN_YEAR}, {MAX_YEAR}]"
                )));
            }
        }
        self.abstract_text = self
            .abstract_text
            .map(|a| a.trim().to_string())
            .filter(|a| !a.is_empty());
        self.body_paragraphs = self
            .body_paragraphs
            .iter()
            .flat_map(|p| split_blocks(p))
            .collect();
        for field in [&mut self.journal, &mut self.license, &mut self.url] {
            *field = field.take().filter(|v| !v.trim().is_empty());
        }
        Ok(self)
    }
}

fn split_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim());
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks
}

/// On-the-wire record. Only `abstract` differs from the in-memory field name.
#[derive(Debug, Deserialize)]
struct RawRecord {
    doc_id: String,
    title: String,
    #[serde(default, rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    body_paragraphs: Vec<String>,
    #[serde(default)]
    authors: Vec<String>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    journal: Option<String>,
    #[serde(default)]
    license: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

impl From<RawRecord> for Document {
    fn from(raw: RawRecord) -> Self {
        Document {
            doc_id: raw.doc_id,
            title: raw.title,
            abstract_text: raw.abstract_text,
            body_paragraphs: raw.body_paragraphs,
            authors: raw.authors,
            source: raw.source.unwrap_or_default(),
            year: raw.year,
            journal: raw.journal,
            license: raw.license,
            url: raw.url,
        }
    }
}

/// Serialized form used both for persistence and for exports.
#[derive(Serialize)]
struct WireRecord<'a> {
    doc_id: &'a str,
    title: &'a str,
    #[serde(rename = "abstract")]
    abstract_text: &'a str,
    body_paragraphs: &'a [String],
    authors: &'a [String],
    source: &'a str,
    year: Option<i32>,
    journal: Option<&'a str>,
    license: Option<&'a str>,
    url: Option<&'a str>,
}

impl<'a> From<&'a Document> for WireRecord<'a> {
    fn from(d: &'a Document) -> Self {
        WireRecord {
            doc_id: &d.doc_id,
            title: &d.title,
            abstract_text: d.abstract_text.as_deref().unwrap_or(""),
            body_paragraphs: &d.body_paragraphs,
            authors: &d.authors,
            source: &d.source,
            year: d.year,
            journal: d.journal.as_deref(),
            license: d.license.as_deref(),
            url: d.url.as_deref(),
        }
    }
}

/// JSON value of a document in the corpus wire schema (`abstract` key).
pub fn document_json(doc: &Document) -> serde_json::Value {
    serde_json::to_value(WireRecord::from(doc)).expect("document serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "jsonl" | "ndjson" => Some(CorpusFormat::Jsonl),
            "csv" => Some(CorpusFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidInput(format!("unknown corpus format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    /// Distinct documents stored by this run.
    pub ingested: usize,
    /// Rows that failed to parse or validate.
    pub skipped: usize,
    /// Rows whose doc_id repeated an earlier row of the same run.
    pub duplicate_overwrites: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Abstract,
    FirstTwoParagraphs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisText {
    pub doc_id: String,
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocFilter {
    /// Inclusive year range.
    pub years: Option<(i32, i32)>,
    /// Accepted sources, compared case-insensitively.
    pub sources: Option<BTreeSet<String>>,
}

impl DocFilter {
    pub fn is_empty(&self) -> bool {
        self.years.is_none() && self.sources.is_none()
    }

    pub fn years(mut self, from: i32, to: i32) -> Self {
        self.years = Some((from, to));
        self
    }

    pub fn sources<I, S>(mut self, sources: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.sources = Some(sources.into_iter().map(Into::into).collect());
        self
    }

    pub fn accepts(&self, doc: &Document) -> bool {
        if let Some((from, to)) = self.years {
            match doc.year {
                Some(y) if y >= from && y <= to => {}
                _ => return false,
            }
        }
        if let Some(sources) = &self.sources {
            if !sources.iter().any(|s| s.eq_ignore_ascii_case(&doc.source)) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Default, Clone)]
pub struct CorpusStore {
    docs: BTreeMap<String, Document>,
    dir: Option<PathBuf>,
}

impl CorpusStore {
    pub fn in_memory() -> Self {
        CorpusStore::default()
    }

    /// Opens (creating if needed) a store directory and loads its documents.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut store = CorpusStore {
            docs: BTreeMap::new(),
            dir: Some(dir.clone()),
        };
        let path = dir.join(DOCUMENTS_FILE);
        if path.exists() {
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRecord = serde_json::from_str(&line).map_err(|e| {
                    Error::parse("document store", format!("line {}: {e}", lineno + 1))
                })?;
                let doc = Document::from(raw).normalize()?;
                store.docs.insert(doc.doc_id.clone(), doc);
            }
        }
        Ok(store)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn ingest(&mut self, path: impl AsRef<Path>, format: CorpusFormat) -> Result<IngestReport> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        self.ingest_reader(file, format)
    }

    /// Ingests from any reader; malformed rows are counted and skipped.
    pub fn ingest_reader<R: Read>(&mut self, reader: R, format: CorpusFormat) -> Result<IngestReport> {
        let parsed = match format {
            CorpusFormat::Jsonl => parse_jsonl(reader)?,
            CorpusFormat::Csv => parse_csv(reader)?,
        };

        let mut report = IngestReport {
            skipped: parsed.skipped,
            ..IngestReport::default()
        };
        let mut batch: BTreeMap<String, Document> = BTreeMap::new();
        for doc in parsed.docs {
            match doc.normalize() {
                Ok(doc) => {
                    if batch.insert(doc.doc_id.clone(), doc).is_some() {
                        report.duplicate_overwrites += 1;
                        tracing::warn!("duplicate doc_id within ingest batch; last record wins");
                    }
                }
                Err(_) => report.skipped += 1,
            }
        }
        report.ingested = batch.len();
        self.docs.extend(batch);
        self.persist()?;
        Ok(report)
    }

    /// Inserts one document directly (fixtures and tests).
    pub fn insert(&mut self, doc: Document) -> Result<()> {
        let doc = doc.normalize()?;
        self.docs.insert(doc.doc_id.clone(), doc);
        Ok(())
    }

    /// Writes the store file; no-op for in-memory stores.
    pub fn persist(&self) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(DOCUMENTS_FILE);
        let tmp = dir.join(format!("{DOCUMENTS_FILE}.tmp"));
        let mut out = String::new();
        for doc in self.docs.values() {
            out.push_str(&serde_json::to_string(&WireRecord::from(doc))?);
            out.push('\n');
        }
        fs::write(&tmp, out).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.docs.get(doc_id)
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.docs.contains_key(doc_id)
    }

    /// Documents in `doc_id` order.
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.docs.values()
    }

    pub fn ids(&self) -> Vec<String> {
        self.docs.keys().cloned().collect()
    }

    pub fn analysis_text(&self, doc_id: &str) -> Result<AnalysisText> {
        let doc = self
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
        if doc.has_abstract() {
            return Ok(AnalysisText {
                doc_id: doc.doc_id.clone(),
                text: doc.abstract_text.clone().unwrap_or_default(),
                provenance: Provenance::Abstract,
            });
        }
        if doc.body_paragraphs.is_empty() {
            return Err(Error::NoAnalyzableText(doc_id.to_string()));
        }
        let text = doc
            .body_paragraphs
            .iter()
            .take(2)
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" ");
        Ok(AnalysisText {
            doc_id: doc.doc_id.clone(),
            text,
            provenance: Provenance::FirstTwoParagraphs,
        })
    }

    /// Keeps the ids (in input order) whose documents satisfy every criterion.
    /// Without criteria the input is returned unchanged.
    pub fn filter<S: AsRef<str>>(&self, doc_ids: &[S], criteria: &DocFilter) -> Vec<String> {
        if criteria.is_empty() {
            return doc_ids.iter().map(|s| s.as_ref().to_string()).collect();
        }
        doc_ids
            .iter()
            .map(AsRef::as_ref)
            .filter(|id| self.get(id).is_some_and(|d| criteria.accepts(d)))
            .map(str::to_string)
            .collect()
    }
}

struct Parsed {
    docs: Vec<Document>,
    skipped: usize,
}

fn parse_jsonl<R: Read>(reader: R) -> Result<Parsed> {
    let mut parsed = Parsed {
        docs: Vec::new(),
        skipped: 0,
    };
    for line in BufReader::new(reader).lines() {
        let line = line.map_err(|e| Error::io("<corpus stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawRecord>(&line) {
            Ok(raw) => parsed.docs.push(raw.into()),
            Err(e) => {
                tracing::warn!("skipping malformed JSONL row: {e}");
                parsed.skipped += 1;
            }
        }
    }
    Ok(parsed)
}

/// CSV: `body_paragraphs` is `|`-joined and `authors` is `;`-joined.
fn parse_csv<R: Read>(reader: R) -> Result<Parsed> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse("CSV header", e.to_string()))?
        .clone();
    let columns: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    for required in ["doc_id", "title"] {
        if !columns.contains_key(required) {
            return Err(Error::parse("CSV header", format!("missing column `{required}`")));
        }
    }

    let mut parsed = Parsed {
        docs: Vec::new(),
        skipped: 0,
    };
    for record in rdr.records() {
        let Ok(record) = record else {
            parsed.skipped += 1;
            continue;
        };
        let field = |name: &str| -> Option<&str> {
            columns
                .get(name)
                .and_then(|&i| record.get(i))
                .map(str::trim)
                .filter(|v| !v.is_empty())
        };
        let (Some(doc_id), Some(title)) = (field("doc_id"), columns.get("title").and_then(|&i| record.get(i)))
        else {
            parsed.skipped += 1;
            continue;
        };
        let year = match field("year").map(str::parse::<i32>) {
            None => None,
            Some(Ok(y)) => Some(y),
            Some(Err(_)) => {
                parsed.skipped += 1;
                continue;
            }
        };
        let split = |value: Option<&str>, sep: char| -> Vec<String> {
            value
                .map(|v| {
                    v.split(sep)
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                })
                .unwrap_or_default()
        };
        parsed.docs.push(Document {
            doc_id: doc_id.to_string(),
            title: title.trim().to_string(),
            abstract_text: field("abstract").map(str::to_string),
            body_paragraphs: split(field("body_paragraphs"), '|'),
            authors: split(field("authors"), ';'),
            source: field("source").unwrap_or_default().to_string(),
            year,
            journal: field("journal").map(str::to_string),
            license: field("license").map(str::to_string),
            url: field("url").map(str::to_string),
        });
    }
    Ok(parsed)
}
