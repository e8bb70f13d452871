//! Embedded message store: in-memory inverted index over text words,
//! hashtags, and mentions, backed by append-only JSONL dumps.
//!
//! One store per node. Readers run concurrently; each write batch is applied
//! atomically with respect to searches. Inserts are idempotent on the
//! `(source, id)` dedup key, so replaying pushes or dumps never duplicates.

mod dump;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::RwLock;

use crate::model::{json_to_message, message_to_json, DedupKey, Message, SourceType};
use crate::tokenize::text_tokens;

pub use dump::DEFAULT_ROTATE_BYTES;

/// Conjunctive search filter. All listed terms/hashtags/mentions must match,
/// and `created_at` must fall inside the optional `[since, until]` window.
#[derive(Debug, Clone)]
pub struct QueryFilter {
    pub terms: Vec<String>,
    pub hashtags: Vec<String>,
    pub mentions: Vec<String>,
    pub since: Option<DateTime<Utc>>,
    pub until: Option<DateTime<Utc>>,
    pub limit: usize,
}

impl Default for QueryFilter {
    fn default() -> Self {
        QueryFilter {
            terms: Vec::new(),
            hashtags: Vec::new(),
            mentions: Vec::new(),
            since: None,
            until: None,
            limit: 100,
        }
    }
}

impl QueryFilter {
    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InsertReport {
    pub received: usize,
    pub new: usize,
    pub known: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImportReport {
    pub new: usize,
    pub known: usize,
    pub malformed: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage failure ({context}): {source}")]
    Storage {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn storage_err(context: &str) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Storage { context: context.to_string(), source }
}

/// Sort key for the time-ordered view: ascending here, iterated in reverse
/// for the newest-first contract (ties broken by id_str, then source).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TimeKey {
    created_at: DateTime<Utc>,
    id_str: String,
    source_type: SourceType,
}

impl TimeKey {
    fn of(m: &Message) -> TimeKey {
        TimeKey { created_at: m.created_at, id_str: m.id_str.clone(), source_type: m.source_type }
    }

    fn dedup_key(&self) -> DedupKey {
        DedupKey::new(self.source_type, self.id_str.clone())
    }
}

#[derive(Default)]
struct Indexes {
    by_key: HashMap<DedupKey, Message>,
    text_index: HashMap<String, HashSet<DedupKey>>,
    hashtag_index: HashMap<String, HashSet<DedupKey>>,
    mention_index: HashMap<String, HashSet<DedupKey>>,
    time_order: std::collections::BTreeSet<TimeKey>,
}

impl Indexes {
    /// Insert without touching the dump. Returns false on a duplicate key.
    fn apply_insert(&mut self, m: Message) -> bool {
        let key = m.dedup_key();
        if self.by_key.contains_key(&key) {
            return false;
        }
        for token in dedup_tokens(&m.text) {
            self.text_index.entry(token).or_default().insert(key.clone());
        }
        for tag in &m.hashtags {
            self.hashtag_index.entry(tag.clone()).or_default().insert(key.clone());
        }
        for name in &m.mentions {
            self.mention_index.entry(name.clone()).or_default().insert(key.clone());
        }
        self.time_order.insert(TimeKey::of(&m));
        self.by_key.insert(key, m);
        true
    }

    fn apply_remove(&mut self, key: &DedupKey) -> bool {
        let Some(m) = self.by_key.remove(key) else {
            return false;
        };
        for token in dedup_tokens(&m.text) {
            detach(&mut self.text_index, &token, key);
        }
        for tag in &m.hashtags {
            detach(&mut self.hashtag_index, tag, key);
        }
        for name in &m.mentions {
            detach(&mut self.mention_index, name, key);
        }
        self.time_order.remove(&TimeKey::of(&m));
        true
    }
}

fn detach(index: &mut HashMap<String, HashSet<DedupKey>>, token: &str, key: &DedupKey) {
    if let Some(set) = index.get_mut(token) {
        set.remove(key);
        if set.is_empty() {
            index.remove(token);
        }
    }
}

fn dedup_tokens(text: &str) -> HashSet<String> {
    text_tokens(text).into_iter().collect()
}

struct Inner {
    indexes: Indexes,
    log: dump::DumpLog,
}

/// The node-local message store.
pub struct IndexedStore {
    inner: RwLock<Inner>,
    dump_dir: PathBuf,
}

impl IndexedStore {
    /// Open (or create) a store over `dump_dir`, replaying any existing dump
    /// files into memory. Malformed lines are skipped.
    pub fn open(dump_dir: impl AsRef<Path>) -> Result<IndexedStore, StoreError> {
        Self::open_with_rotation(dump_dir, DEFAULT_ROTATE_BYTES)
    }

    pub fn open_with_rotation(
        dump_dir: impl AsRef<Path>,
        rotate_bytes: u64,
    ) -> Result<IndexedStore, StoreError> {
        let dir = dump_dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(storage_err("create dump dir"))?;
        let mut indexes = Indexes::default();
        dump::replay(&dir, |op| match op {
            dump::ReplayOp::Insert(m) => {
                indexes.apply_insert(m);
            }
            dump::ReplayOp::Flush(keys) => {
                for key in &keys {
                    indexes.apply_remove(key);
                }
            }
        })
        .map_err(storage_err("replay dumps"))?;
        let log = dump::DumpLog::open(&dir, rotate_bytes).map_err(storage_err("open dump log"))?;
        Ok(IndexedStore { inner: RwLock::new(Inner { indexes, log }), dump_dir: dir })
    }

    pub fn dump_dir(&self) -> &Path {
        &self.dump_dir
    }

    pub fn len(&self) -> usize {
        self.inner.read().indexes.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, key: &DedupKey) -> bool {
        self.inner.read().indexes.by_key.contains_key(key)
    }

    /// Insert a batch, deduplicating on `(source, id)`. New messages are
    /// appended to the dump before they become visible; a dump write failure
    /// leaves memory untouched.
    pub fn insert_batch(&self, messages: &[Message]) -> Result<InsertReport, StoreError> {
        self.insert_batch_detailed(messages).map(|(report, _)| report)
    }

    /// Like [`IndexedStore::insert_batch`] but also hands back the messages
    /// that were actually new (campaign crediting needs them).
    pub fn insert_batch_detailed(
        &self,
        messages: &[Message],
    ) -> Result<(InsertReport, Vec<Message>), StoreError> {
        let mut inner = self.inner.write();
        let mut batch_keys = HashSet::new();
        let mut fresh: Vec<&Message> = Vec::new();
        for m in messages {
            let key = m.dedup_key();
            if !inner.indexes.by_key.contains_key(&key) && batch_keys.insert(key) {
                fresh.push(m);
            }
        }
        let lines: Vec<String> = fresh.iter().map(|m| message_to_json(m).to_string()).collect();
        inner.log.append_lines(&lines).map_err(storage_err("append dump"))?;
        for m in &fresh {
            inner.indexes.apply_insert((*m).clone());
        }
        let report = InsertReport {
            received: messages.len(),
            new: fresh.len(),
            known: messages.len() - fresh.len(),
        };
        Ok((report, fresh.into_iter().cloned().collect()))
    }

    /// Remove the listed keys, writing a flush tombstone so replay converges.
    /// Unknown keys are ignored. Returns how many were removed.
    pub fn flush(&self, keys: &[DedupKey]) -> Result<usize, StoreError> {
        let mut inner = self.inner.write();
        let present: Vec<DedupKey> =
            keys.iter().filter(|k| inner.indexes.by_key.contains_key(*k)).cloned().collect();
        if present.is_empty() {
            return Ok(0);
        }
        let line = dump::tombstone_line(&present);
        inner.log.append_lines(&[line]).map_err(storage_err("append tombstone"))?;
        for key in &present {
            inner.indexes.apply_remove(key);
        }
        Ok(present.len())
    }

    /// Conjunctive search, newest first (ties by id_str descending),
    /// truncated to `filter.limit`.
    pub fn search(&self, filter: &QueryFilter) -> Vec<Message> {
        let inner = self.inner.read();
        let idx = &inner.indexes;
        let in_window = |created: &DateTime<Utc>| {
            filter.since.map_or(true, |s| *created >= s)
                && filter.until.map_or(true, |u| *created <= u)
        };

        if filter.terms.is_empty() && filter.hashtags.is_empty() && filter.mentions.is_empty() {
            return idx
                .time_order
                .iter()
                .rev()
                .filter(|tk| in_window(&tk.created_at))
                .take(filter.limit)
                .map(|tk| idx.by_key[&tk.dedup_key()].clone())
                .collect();
        }

        let mut groups: Vec<&HashSet<DedupKey>> = Vec::new();
        for (tokens, index) in [
            (&filter.terms, &idx.text_index),
            (&filter.hashtags, &idx.hashtag_index),
            (&filter.mentions, &idx.mention_index),
        ] {
            for token in tokens {
                match index.get(&token.to_ascii_lowercase()) {
                    Some(set) => groups.push(set),
                    None => return Vec::new(),
                }
            }
        }
        groups.sort_by_key(|set| set.len());
        let (seed, rest) = groups.split_first().expect("at least one group");
        let mut matches: Vec<&Message> = seed
            .iter()
            .filter(|key| rest.iter().all(|set| set.contains(*key)))
            .map(|key| &idx.by_key[key])
            .filter(|m| in_window(&m.created_at))
            .collect();
        matches.sort_by(|a, b| {
            (b.created_at, &b.id_str, b.source_type).cmp(&(a.created_at, &a.id_str, a.source_type))
        });
        matches.into_iter().take(filter.limit).cloned().collect()
    }

    /// Oldest-first slice of up to `n` messages, used by the caretaker to
    /// drain pending pushes.
    pub fn list_batch(&self, n: usize) -> Vec<Message> {
        let inner = self.inner.read();
        let idx = &inner.indexes;
        idx.time_order.iter().take(n).map(|tk| idx.by_key[&tk.dedup_key()].clone()).collect()
    }

    /// Import a JSONL dump file: message lines are inserted as one batch,
    /// tombstone lines are ignored, malformed lines are counted and skipped.
    pub fn import_path(&self, path: impl AsRef<Path>) -> Result<ImportReport, StoreError> {
        let file = File::open(path.as_ref()).map_err(storage_err("open import file"))?;
        let mut messages = Vec::new();
        let mut malformed = 0;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(storage_err("read import file"))?;
            match dump::parse_line(&line) {
                Ok(Some(dump::ReplayOp::Insert(m))) => messages.push(m),
                Ok(Some(dump::ReplayOp::Flush(_))) | Ok(None) => {}
                Err(()) => malformed += 1,
            }
        }
        let report = self.insert_batch(&messages)?;
        Ok(ImportReport { new: report.new, known: report.known, malformed })
    }

    /// Import already-parsed lines (the HTTP import endpoint shares this).
    pub fn import_lines(&self, body: &str) -> Result<ImportReport, StoreError> {
        let mut messages = Vec::new();
        let mut malformed = 0;
        for line in body.lines() {
            match dump::parse_line(line) {
                Ok(Some(dump::ReplayOp::Insert(m))) => messages.push(m),
                Ok(Some(dump::ReplayOp::Flush(_))) | Ok(None) => {}
                Err(()) => malformed += 1,
            }
        }
        let report = self.insert_batch(&messages)?;
        Ok(ImportReport { new: report.new, known: report.known, malformed })
    }

    /// Export messages matching `filter` as JSON lines. Returns the count.
    pub fn export_to(
        &self,
        filter: &QueryFilter,
        path: impl AsRef<Path>,
    ) -> Result<usize, StoreError> {
        let matches = self.search(filter);
        let file = File::create(path.as_ref()).map_err(storage_err("create export file"))?;
        let mut writer = BufWriter::new(file);
        for m in &matches {
            writeln!(writer, "{}", message_to_json(m)).map_err(storage_err("write export"))?;
        }
        writer.flush().map_err(storage_err("flush export"))?;
        Ok(matches.len())
    }

    /// All dedup keys currently stored (test and caretaker helper).
    pub fn keys(&self) -> Vec<DedupKey> {
        self.inner.read().indexes.by_key.keys().cloned().collect()
    }

    pub fn get(&self, key: &DedupKey) -> Option<Message> {
        self.inner.read().indexes.by_key.get(key).cloned()
    }
}

/// Parse one exported/dumped line into a message, if it is one.
pub fn parse_dump_line(line: &str) -> Option<Message> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    json_to_message(&value).ok()
}
