//! Versioned document collections.
//!
//! Every mutation bumps the version by one and appends a snapshot to the
//! briefcase history. On disk the store is a compacted snapshot
//! (`briefcases.json`) plus an append-only event log (`briefcases.log`)
//! replayed on open.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{document_json, CorpusStore};
use crate::error::{Error, Result};

pub const SNAPSHOT_FILE: &str = "briefcases.json";
pub const LOG_FILE: &str = "briefcases.log";
pub const DEFAULT_NAMESPACE: &str = "default";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u64,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Briefcase {
    pub briefcase_id: String,
    pub namespace: String,
    pub name: String,
    pub version: u64,
    pub doc_ids: Vec<String>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub updated_at: u64,
    pub history: Vec<Snapshot>,
}

impl Briefcase {
    pub fn snapshot(&self, version: u64) -> Option<&Snapshot> {
        self.history.iter().find(|s| s.version == version)
    }

    fn apply(&mut self, add: &[String], remove: &[String], at: u64) {
        let removed: BTreeSet<&str> = remove.iter().map(String::as_str).collect();
        self.doc_ids.retain(|d| !removed.contains(d.as_str()));
        for d in add {
            if !self.doc_ids.contains(d) {
                self.doc_ids.push(d.clone());
            }
        }
        self.version += 1;
        self.updated_at = at;
        self.history.push(Snapshot {
            version: self.version,
            doc_ids: self.doc_ids.clone(),
        });
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Create {
        namespace: String,
        briefcase_id: String,
        name: String,
        at: u64,
    },
    Mutate {
        namespace: String,
        briefcase_id: String,
        add: Vec<String>,
        remove: Vec<String>,
        at: u64,
    },
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct State {
    next_id: u64,
    briefcases: BTreeMap<String, BTreeMap<String, Briefcase>>,
}

impl State {
    fn get(&self, namespace: &str, id: &str) -> Result<&Briefcase> {
        self.briefcases
            .get(namespace)
            .and_then(|m| m.get(id))
            .ok_or_else(|| Error::UnknownBriefcase(id.to_string()))
    }

    fn get_mut(&mut self, namespace: &str, id: &str) -> Result<&mut Briefcase> {
        self.briefcases
            .get_mut(namespace)
            .and_then(|m| m.get_mut(id))
            .ok_or_else(|| Error::UnknownBriefcase(id.to_string()))
    }

    fn apply(&mut self, event: &Event) -> Result<()> {
        match event {
            Event::Create {
                namespace,
                briefcase_id,
                name,
                at,
            } => {
                let briefcase = Briefcase {
                    briefcase_id: briefcase_id.clone(),
                    namespace: namespace.clone(),
                    name: name.clone(),
                    version: 1,
                    doc_ids: Vec::new(),
                    created_at: *at,
                    updated_at: *at,
                    history: vec![Snapshot {
                        version: 1,
                        doc_ids: Vec::new(),
                    }],
                };
                if let Some(n) = briefcase_id.strip_prefix("bc-").and_then(|n| n.parse::<u64>().ok()) {
                    self.next_id = self.next_id.max(n);
                }
                self.briefcases
                    .entry(namespace.clone())
                    .or_default()
                    .insert(briefcase_id.clone(), briefcase);
            }
            Event::Mutate {
                namespace,
                briefcase_id,
                add,
                remove,
                at,
            } => self.get_mut(namespace, briefcase_id)?.apply(add, remove, *at),
        }
        Ok(())
    }
}

type Clock = fn() -> u64;

fn system_clock() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

struct Inner {
    state: State,
    log: Option<File>,
}

/// Thread-safe briefcase store; mutations are serialized.
pub struct BriefcaseStore {
    inner: Mutex<Inner>,
    dir: Option<PathBuf>,
    clock: Clock,
}

impl BriefcaseStore {
    pub fn in_memory() -> Self {
        BriefcaseStore {
            inner: Mutex::new(Inner {
                state: State::default(),
                log: None,
            }),
            dir: None,
            clock: system_clock,
        }
    }

    /// Opens (or creates) a store in `dir`, replays the log and compacts it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let snapshot_path = dir.join(SNAPSHOT_FILE);
        let mut state: State = if snapshot_path.exists() {
            let text = fs::read_to_string(&snapshot_path).map_err(|e| Error::io(&snapshot_path, e))?;
            serde_json::from_str(&text)?
        } else {
            State::default()
        };
        let log_path = dir.join(LOG_FILE);
        if log_path.exists() {
            let file = File::open(&log_path).map_err(|e| Error::io(&log_path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(&log_path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Event>(&line) {
                    Ok(event) => state.apply(&event)?,
                    // A torn final write from a crash; everything before it is intact.
                    Err(e) => tracing::warn!(error = %e, "skipping unreadable briefcase log entry"),
                }
            }
        }
        let store = BriefcaseStore {
            inner: Mutex::new(Inner { state, log: None }),
            dir: Some(dir),
            clock: system_clock,
        };
        store.compact()?;
        Ok(store)
    }

    /// Replaces the wall clock, e.g. for reproducible exports.
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Writes the snapshot and truncates the log.
    pub fn compact(&self) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let mut inner = self.lock();
        let snapshot_path = dir.join(SNAPSHOT_FILE);
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&inner.state)?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &snapshot_path).map_err(|e| Error::io(&snapshot_path, e))?;
        let log_path = dir.join(LOG_FILE);
        let log = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        inner.log = Some(log);
        Ok(())
    }

    fn record(&self, inner: &mut Inner, event: Event) -> Result<()> {
        inner.state.apply(&event)?;
        if let (Some(log), Some(dir)) = (inner.log.as_mut(), &self.dir) {
            let mut line = serde_json::to_string(&event)?;
            line.push('\n');
            let path = dir.join(LOG_FILE);
            log.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))?;
            log.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Creates an empty briefcase at version 1.
    pub fn create(&self, namespace: &str, name: &str) -> Result<Briefcase> {
        let mut inner = self.lock();
        let id = format!("bc-{}", inner.state.next_id + 1);
        let event = Event::Create {
            namespace: namespace.to_string(),
            briefcase_id: id.clone(),
            name: name.to_string(),
            at: (self.clock)(),
        };
        self.record(&mut inner, event)?;
        Ok(inner.state.get(namespace, &id)?.clone())
    }

    pub fn get(&self, namespace: &str, id: &str) -> Result<Briefcase> {
        Ok(self.lock().state.get(namespace, id)?.clone())
    }

    pub fn list(&self, namespace: &str) -> Vec<Briefcase> {
        let inner = self.lock();
        let mut out: Vec<Briefcase> = inner
            .state
            .briefcases
            .get(namespace)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default();
        out.sort_by_key(|b| id_number(&b.briefcase_id));
        out
    }

    /// Removes then appends documents (skipping ones already present) and
    /// bumps the version, even when nothing changes. Every added or removed
    /// id must satisfy `known`.
    pub fn mutate(
        &self,
        namespace: &str,
        id: &str,
        add: &[String],
        remove: &[String],
        known: impl Fn(&str) -> bool,
    ) -> Result<Briefcase> {
        let adding: BTreeSet<&String> = add.iter().collect();
        if let Some(both) = remove.iter().find(|d| adding.contains(d)) {
            return Err(Error::InvalidInput(format!("`{both}` is both added and removed")));
        }
        if let Some(unknown) = add.iter().chain(remove).find(|d| !known(d)) {
            return Err(Error::UnknownDocument(unknown.clone()));
        }
        let mut inner = self.lock();
        inner.state.get(namespace, id)?;
        let event = Event::Mutate {
            namespace: namespace.to_string(),
            briefcase_id: id.to_string(),
            add: add.to_vec(),
            remove: remove.to_vec(),
            at: (self.clock)(),
        };
        self.record(&mut inner, event)?;
        Ok(inner.state.get(namespace, id)?.clone())
    }

    /// Document ids of `version` (latest when `None`).
    pub fn doc_ids_at(&self, namespace: &str, id: &str, version: Option<u64>) -> Result<(u64, Vec<String>)> {
        let inner = self.lock();
        let briefcase = inner.state.get(namespace, id)?;
        let version = version.unwrap_or(briefcase.version);
        let snapshot = briefcase.snapshot(version).ok_or_else(|| Error::UnknownVersion {
            id: id.to_string(),
            version,
        })?;
        Ok((version, snapshot.doc_ids.clone()))
    }

    /// Export document: briefcase name and version plus full metadata of
    /// every document in that version.
    pub fn export(&self, namespace: &str, id: &str, version: Option<u64>, corpus: &CorpusStore) -> Result<serde_json::Value> {
        let (version, doc_ids) = self.doc_ids_at(namespace, id, version)?;
        let name = self.get(namespace, id)?.name;
        let documents = doc_ids
            .iter()
            .map(|d| {
                corpus
                    .get(d)
                    .map(document_json)
                    .ok_or_else(|| Error::UnknownDocument(d.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(json!({
            "briefcase_id": id,
            "name": name,
            "version": version,
            "documents": documents,
        }))
    }
}

fn id_number(id: &str) -> u64 {
    id.strip_prefix("bc-").and_then(|n| n.parse().ok()).unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn any(_: &str) -> bool {
        true
    }

    const NS: &str = DEFAULT_NAMESPACE;

    #[test]
    fn add_to_fresh_briefcase() {
        let store = BriefcaseStore::in_memory();
        let b = store.create(NS, "reading list").unwrap();
        assert_eq!((b.version, b.doc_ids.len()), (1, 0));
        let b = store.mutate(NS, &b.briefcase_id, &ids(&["d1", "d2"]), &[], any).unwrap();
        assert_eq!(b.version, 2);
        assert_eq!(b.doc_ids, ["d1", "d2"]);
    }

    #[test]
    fn duplicate_add_still_bumps_version() {
        let store = BriefcaseStore::in_memory();
        let id = store.create(NS, "x").unwrap().briefcase_id;
        store.mutate(NS, &id, &ids(&["d1"]), &[], any).unwrap();
        let b = store.mutate(NS, &id, &ids(&["d1"]), &[], any).unwrap();
        assert_eq!(b.version, 3);
        assert_eq!(b.doc_ids, ["d1"]);
    }

    #[test]
    fn history_is_preserved() {
        let store = BriefcaseStore::in_memory();
        let id = store.create(NS, "x").unwrap().briefcase_id;
        store.mutate(NS, &id, &ids(&["d1", "d2", "d3"]), &[], any).unwrap();
        store.mutate(NS, &id, &[], &ids(&["d2"]), any).unwrap();
        assert_eq!(store.doc_ids_at(NS, &id, Some(2)).unwrap().1, ["d1", "d2", "d3"]);
        assert_eq!(store.doc_ids_at(NS, &id, None).unwrap(), (3, ids(&["d1", "d3"])));
        assert!(matches!(store.doc_ids_at(NS, &id, Some(9)), Err(Error::UnknownVersion { .. })));
    }

    #[test]
    fn rejects_bad_mutations() {
        let store = BriefcaseStore::in_memory();
        let id = store.create(NS, "x").unwrap().briefcase_id;
        assert!(matches!(
            store.mutate(NS, &id, &ids(&["d1"]), &ids(&["d1"]), any),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            store.mutate(NS, &id, &ids(&["nope"]), &[], |d| d != "nope"),
            Err(Error::UnknownDocument(_))
        ));
        assert!(matches!(store.mutate(NS, "bc-99", &[], &[], any), Err(Error::UnknownBriefcase(_))));
        assert_eq!(store.get(NS, &id).unwrap().version, 1);
    }

    #[test]
    fn namespaces_are_isolated() {
        let store = BriefcaseStore::in_memory();
        let id = store.create("alice", "x").unwrap().briefcase_id;
        assert!(store.get("bob", &id).is_err());
        assert!(store.list("bob").is_empty());
        assert_eq!(store.list("alice").len(), 1);
    }

    #[test]
    fn export_versions() {
        let mut corpus = CorpusStore::in_memory();
        corpus.insert(Document::new("d1", "One").with_year(2020)).unwrap();
        corpus.insert(Document::new("d2", "Two")).unwrap();
        let store = BriefcaseStore::in_memory();
        let id = store.create(NS, "x").unwrap().briefcase_id;
        let empty = store.export(NS, &id, None, &corpus).unwrap();
        assert_eq!(empty["documents"], json!([]));
        store.mutate(NS, &id, &ids(&["d1"]), &[], |d| corpus.contains(d)).unwrap();
        store.mutate(NS, &id, &ids(&["d2"]), &[], |d| corpus.contains(d)).unwrap();
        let v2 = store.export(NS, &id, Some(2), &corpus).unwrap();
        assert_eq!(v2["version"], 2);
        assert_eq!(v2["documents"].as_array().unwrap().len(), 1);
        assert_eq!(v2["documents"][0]["doc_id"], "d1");
        assert_eq!(store.export(NS, &id, None, &corpus).unwrap()["version"], 3);
    }

    #[test]
    fn reopen_replays_log() {
        let dir = tempfile::tempdir().unwrap();
        let id;
        {
            let store = BriefcaseStore::open(dir.path()).unwrap();
            id = store.create(NS, "persisted").unwrap().briefcase_id;
            store.mutate(NS, &id, &ids(&["a", "b"]), &[], any).unwrap();
            store.mutate(NS, &id, &[], &ids(&["a"]), any).unwrap();
            // Not compacted: state lives only in the log.
            assert!(fs::read_to_string(dir.path().join(LOG_FILE)).unwrap().lines().count() == 3);
        }
        let store = BriefcaseStore::open(dir.path()).unwrap();
        let b = store.get(NS, &id).unwrap();
        assert_eq!(b.version, 3);
        assert_eq!(b.doc_ids, ["b"]);
        assert_eq!(b.history.len(), 3);
        assert_eq!(store.create(NS, "next").unwrap().briefcase_id, "bc-2");
        assert_eq!(fs::read_to_string(dir.path().join(LOG_FILE)).unwrap().lines().count(), 1);
    }

    #[test]
    fn torn_log_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = BriefcaseStore::open(dir.path()).unwrap();
            store.create(NS, "x").unwrap();
        }
        let mut log = OpenOptions::new().append(true).open(dir.path().join(LOG_FILE)).unwrap();
        log.write_all(b"{\"event\":\"mut").unwrap();
        let store = BriefcaseStore::open(dir.path()).unwrap();
        assert_eq!(store.list(NS).len(), 1);
    }

    #[test]
    fn history_replay_matches_current() {
        let store = BriefcaseStore::in_memory();
        let id = store.create(NS, "x").unwrap().briefcase_id;
        let steps: [(&[&str], &[&str]); 4] = [(&["a", "b"], &[]), (&["c"], &["a"]), (&["a"], &[]), (&[], &["b", "c"])];
        let mut expected: Vec<String> = Vec::new();
        for (add, remove) in steps {
            expected.retain(|d| !remove.contains(&d.as_str()));
            for a in add {
                if !expected.iter().any(|d| d == a) {
                    expected.push(a.to_string());
                }
            }
            let b = store.mutate(NS, &id, &ids(add), &ids(remove), any).unwrap();
            assert_eq!(b.doc_ids, expected);
        }
        let b = store.get(NS, &id).unwrap();
        assert_eq!(b.history.last().unwrap().doc_ids, b.doc_ids);
        assert!(b.history.windows(2).all(|w| w[1].version == w[0].version + 1));
    }
}
