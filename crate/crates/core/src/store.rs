//! Single-directory embedded store.
//!
//! Every record kind lives in its own JSON-Lines file. Writes append one line
//! per changed record; on open the files are replayed in order and the last
//! line for a natural key wins. Rewrites (dedup drops) go through a temp file
//! and an atomic rename.
//!
//! ```text
//! <store>/
//!   meta.json        {"format_version": 1, "article_scopes": {...}}
//!   articles.jsonl   links.jsonl   posts.jsonl   labeled.jsonl   tasks.jsonl
//!   audit.jsonl      append-only audit trail
//!   html/            raw article HTML, referenced by NewsArticle::html_ref
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt::Debug;
use std::fs::{self, File, OpenOptions};
use std::hash::Hash;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::model::{
    LabeledKey, LabeledPost, NewsArticle, Platform, PostKey, SocialLink, SocialPost, TaskVerdict, VerificationTask,
};

pub const FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "meta.json";
const AUDIT_FILE: &str = "audit.jsonl";
const HTML_DIR: &str = "html";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store at {path} is corrupt: {reason}")]
    StorageCorrupt { path: PathBuf, reason: String },
    #[error("permission denied: {0}")]
    PermissionDenied(PathBuf),
    #[error("{kind} violates invariant: {invariant}")]
    InvariantViolation {
        kind: &'static str,
        invariant: &'static str,
    },
    #[error("{kind} references missing {target} {key}")]
    DanglingReference {
        kind: &'static str,
        target: &'static str,
        key: String,
    },
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::PermissionDenied {
            StoreError::PermissionDenied(path.to_path_buf())
        } else {
            StoreError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub format_version: u32,
    /// Article-body CSS selector per source acronym, recorded at ingest so
    /// link extraction can scope anchors without the original profile file.
    #[serde(default)]
    pub article_scopes: BTreeMap<String, String>,
}

impl Default for StoreMeta {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            article_scopes: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditEvent {
    DuplicateDropped {
        platform: Platform,
        post_uid: String,
        dropped_news_id: String,
        kept_news_id: String,
        label_conflict: bool,
    },
    Verdict {
        task_id: String,
        platform: Platform,
        post_uid: String,
        news_id: String,
        verdict: TaskVerdict,
        reviewer: String,
        note: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: AuditEvent,
}

/// A persistable record kind.
pub trait Record: Serialize + DeserializeOwned + Clone + PartialEq + Debug {
    type Key: Clone + Eq + Hash + Ord + Debug;
    const KIND: &'static str;
    const FILE: &'static str;

    fn key(&self) -> Self::Key;
    fn validate(&self) -> Result<(), &'static str>;
    fn table(store: &Store) -> &Table<Self>;
    fn table_mut(store: &mut Store) -> &mut Table<Self>;

    /// Cross-record checks run before a write.
    fn check_against(&self, _store: &Store, _previous: Option<&Self>) -> Result<(), StoreError> {
        Ok(())
    }
}

impl Record for NewsArticle {
    type Key = String;
    const KIND: &'static str = "NewsArticle";
    const FILE: &'static str = "articles.jsonl";

    fn key(&self) -> String {
        self.news_id.clone()
    }
    fn validate(&self) -> Result<(), &'static str> {
        NewsArticle::validate(self)
    }
    fn table(store: &Store) -> &Table<Self> {
        &store.articles
    }
    fn table_mut(store: &mut Store) -> &mut Table<Self> {
        &mut store.articles
    }
}

/// `(article_id, platform, post_uid)`.
pub type LinkKey = (String, PostKey);

impl Record for SocialLink {
    type Key = LinkKey;
    const KIND: &'static str = "SocialLink";
    const FILE: &'static str = "links.jsonl";

    fn key(&self) -> LinkKey {
        (self.article_id.clone(), self.post_key())
    }
    fn validate(&self) -> Result<(), &'static str> {
        if self.platform == Platform::Other {
            return Err("links to platform Other are never persisted");
        }
        if self.post_uid.is_empty() {
            return Err("post_uid must be non-empty for a social platform");
        }
        Ok(())
    }
    fn table(store: &Store) -> &Table<Self> {
        &store.links
    }
    fn table_mut(store: &mut Store) -> &mut Table<Self> {
        &mut store.links
    }
    fn check_against(&self, store: &Store, _previous: Option<&Self>) -> Result<(), StoreError> {
        if store.article(&self.article_id).is_none() {
            return Err(StoreError::DanglingReference {
                kind: Self::KIND,
                target: "NewsArticle",
                key: self.article_id.clone(),
            });
        }
        Ok(())
    }
}

impl Record for SocialPost {
    type Key = PostKey;
    const KIND: &'static str = "SocialPost";
    const FILE: &'static str = "posts.jsonl";

    fn key(&self) -> PostKey {
        SocialPost::key(self)
    }
    fn validate(&self) -> Result<(), &'static str> {
        SocialPost::validate(self)
    }
    fn table(store: &Store) -> &Table<Self> {
        &store.posts
    }
    fn table_mut(store: &mut Store) -> &mut Table<Self> {
        &mut store.posts
    }
}

impl Record for LabeledPost {
    type Key = LabeledKey;
    const KIND: &'static str = "LabeledPost";
    const FILE: &'static str = "labeled.jsonl";

    fn key(&self) -> LabeledKey {
        LabeledPost::key(self)
    }
    fn validate(&self) -> Result<(), &'static str> {
        if self.label_raw.trim().is_empty() {
            return Err("label_raw must be non-empty");
        }
        Ok(())
    }
    fn table(store: &Store) -> &Table<Self> {
        &store.labeled
    }
    fn table_mut(store: &mut Store) -> &mut Table<Self> {
        &mut store.labeled
    }
    fn check_against(&self, store: &Store, previous: Option<&Self>) -> Result<(), StoreError> {
        if store.article(&self.news_id).is_none() {
            return Err(StoreError::DanglingReference {
                kind: Self::KIND,
                target: "NewsArticle",
                key: self.news_id.clone(),
            });
        }
        if store.post(&self.post_key()).is_none() {
            return Err(StoreError::DanglingReference {
                kind: Self::KIND,
                target: "SocialPost",
                key: self.post_key().to_string(),
            });
        }
        if let Some(prev) = previous {
            if !prev.verification_state.can_move_to(self.verification_state) {
                return Err(StoreError::InvariantViolation {
                    kind: Self::KIND,
                    invariant: "verification_state only moves unverified -> sampled -> confirmed|rejected",
                });
            }
        }
        Ok(())
    }
}

impl Record for VerificationTask {
    type Key = String;
    const KIND: &'static str = "VerificationTask";
    const FILE: &'static str = "tasks.jsonl";

    fn key(&self) -> String {
        self.task_id.clone()
    }
    fn validate(&self) -> Result<(), &'static str> {
        VerificationTask::validate(self)
    }
    fn table(store: &Store) -> &Table<Self> {
        &store.tasks
    }
    fn table_mut(store: &mut Store) -> &mut Table<Self> {
        &mut store.tasks
    }
    fn check_against(&self, store: &Store, previous: Option<&Self>) -> Result<(), StoreError> {
        let labeled_key = self.labeled_key();
        if store.labeled_post(&labeled_key).is_none() {
            return Err(StoreError::DanglingReference {
                kind: Self::KIND,
                target: "LabeledPost",
                key: format!("{}/{}", labeled_key.post, labeled_key.news_id),
            });
        }
        if store
            .tasks
            .iter()
            .any(|t| t.task_id != self.task_id && t.labeled_key() == labeled_key)
        {
            return Err(StoreError::InvariantViolation {
                kind: Self::KIND,
                invariant: "at most one task per labeled post",
            });
        }
        if let Some(prev) = previous {
            if prev.verdict != TaskVerdict::Pending && prev.verdict != self.verdict {
                return Err(StoreError::InvariantViolation {
                    kind: Self::KIND,
                    invariant: "a decided task never changes verdict",
                });
            }
        }
        Ok(())
    }
}

/// In-memory index over one JSON-Lines file.
#[derive(Debug)]
pub struct Table<R: Record> {
    path: PathBuf,
    rows: IndexMap<R::Key, R>,
}

impl<R: Record> Table<R> {
    fn load(path: PathBuf) -> Result<Self, StoreError> {
        let rows = read_jsonl::<R>(&path)?.into_iter().map(|r| (r.key(), r)).collect();
        Ok(Self { path, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, key: &R::Key) -> Option<&R> {
        self.rows.get(key)
    }

    /// Records in first-insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &R> {
        self.rows.values()
    }

    fn append(&self, record: &R) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("records always serialize");
        line.push('\n');
        let mut file = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&self.path)
            .map_err(|e| StoreError::io(&self.path, e))?;
        file.write_all(line.as_bytes())
            .map_err(|e| StoreError::io(&self.path, e))
    }

    fn rewrite(&self) -> Result<(), StoreError> {
        let mut buf = String::new();
        for record in self.rows.values() {
            buf.push_str(&serde_json::to_string(record).expect("records always serialize"));
            buf.push('\n');
        }
        write_atomic(&self.path, buf.as_bytes())
    }
}

fn read_jsonl<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| match e.kind() {
            io::ErrorKind::InvalidData => StoreError::StorageCorrupt {
                path: path.to_path_buf(),
                reason: format!("line {} is not UTF-8", n + 1),
            },
            _ => StoreError::io(path, e),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| StoreError::StorageCorrupt {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", n + 1),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

/// Handle to an open store. Writes go through `&mut self`, so one handle is
/// the single writer; shared references may read concurrently.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    meta: StoreMeta,
    articles: Table<NewsArticle>,
    links: Table<SocialLink>,
    posts: Table<SocialPost>,
    labeled: Table<LabeledPost>,
    tasks: Table<VerificationTask>,
    audit: Vec<AuditEntry>,
}

const DATA_FILES: [&str; 5] = [
    NewsArticle::FILE,
    SocialLink::FILE,
    SocialPost::FILE,
    LabeledPost::FILE,
    VerificationTask::FILE,
];

impl Store {
    /// Opens the store at `path`, creating an empty one when the directory
    /// is absent or empty.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = path.as_ref().to_path_buf();
        let meta_path = root.join(META_FILE);
        if root.is_file() {
            return Err(StoreError::StorageCorrupt {
                path: root,
                reason: "path is a file, not a store directory".into(),
            });
        }
        if !meta_path.exists() {
            Self::init(&root)?;
        }
        let meta_bytes = fs::read(&meta_path).map_err(|e| StoreError::io(&meta_path, e))?;
        let meta: StoreMeta = serde_json::from_slice(&meta_bytes).map_err(|e| StoreError::StorageCorrupt {
            path: meta_path.clone(),
            reason: e.to_string(),
        })?;
        if meta.format_version != FORMAT_VERSION {
            return Err(StoreError::StorageCorrupt {
                path: meta_path,
                reason: format!("unsupported format_version {}", meta.format_version),
            });
        }
        Ok(Self {
            articles: Table::load(root.join(NewsArticle::FILE))?,
            links: Table::load(root.join(SocialLink::FILE))?,
            posts: Table::load(root.join(SocialPost::FILE))?,
            labeled: Table::load(root.join(LabeledPost::FILE))?,
            tasks: Table::load(root.join(VerificationTask::FILE))?,
            audit: read_jsonl(&root.join(AUDIT_FILE))?,
            meta,
            root,
        })
    }

    fn init(root: &Path) -> Result<(), StoreError> {
        if root.exists() {
            let mut entries = fs::read_dir(root).map_err(|e| StoreError::io(root, e))?;
            if entries.next().is_some() {
                return Err(StoreError::StorageCorrupt {
                    path: root.to_path_buf(),
                    reason: "directory is not empty and has no meta.json".into(),
                });
            }
        }
        fs::create_dir_all(root.join(HTML_DIR)).map_err(|e| StoreError::io(root, e))?;
        for name in DATA_FILES.iter().chain([&AUDIT_FILE]) {
            let p = root.join(name);
            File::create(&p).map_err(|e| StoreError::io(&p, e))?;
        }
        let meta = serde_json::to_vec_pretty(&StoreMeta::default()).expect("meta serializes");
        write_atomic(&root.join(META_FILE), &meta)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn meta(&self) -> &StoreMeta {
        &self.meta
    }

    pub fn set_article_scope(&mut self, acronym: &str, selector: &str) -> Result<(), StoreError> {
        if self.meta.article_scopes.get(acronym).map(String::as_str) == Some(selector) {
            return Ok(());
        }
        self.meta
            .article_scopes
            .insert(acronym.to_string(), selector.to_string());
        let bytes = serde_json::to_vec_pretty(&self.meta).expect("meta serializes");
        write_atomic(&self.root.join(META_FILE), &bytes)
    }

    /// Inserts or replaces by natural key. Re-upserting an identical record
    /// writes nothing.
    pub fn upsert<R: Record>(&mut self, record: R) -> Result<R::Key, StoreError> {
        record.validate().map_err(|invariant| StoreError::InvariantViolation {
            kind: R::KIND,
            invariant,
        })?;
        let key = record.key();
        let previous = R::table(self).get(&key);
        if previous == Some(&record) {
            return Ok(key);
        }
        record.check_against(self, previous)?;
        let table = R::table_mut(self);
        table.append(&record)?;
        table.rows.insert(key.clone(), record);
        Ok(key)
    }

    pub fn get<R: Record>(&self, key: &R::Key) -> Option<&R> {
        R::table(self).get(key)
    }

    pub fn all<'a, R: Record + 'a>(&'a self) -> impl Iterator<Item = &'a R> {
        R::table(self).iter()
    }

    pub fn count<R: Record>(&self) -> usize {
        R::table(self).len()
    }

    pub fn article(&self, news_id: &str) -> Option<&NewsArticle> {
        self.articles.rows.get(news_id)
    }

    pub fn articles(&self) -> impl Iterator<Item = &NewsArticle> {
        self.articles.iter()
    }

    pub fn links(&self) -> impl Iterator<Item = &SocialLink> {
        self.links.iter()
    }

    pub fn post(&self, key: &PostKey) -> Option<&SocialPost> {
        self.posts.get(key)
    }

    pub fn posts(&self) -> impl Iterator<Item = &SocialPost> {
        self.posts.iter()
    }

    pub fn labeled_post(&self, key: &LabeledKey) -> Option<&LabeledPost> {
        self.labeled.get(key)
    }

    pub fn labeled_posts(&self) -> impl Iterator<Item = &LabeledPost> {
        self.labeled.iter()
    }

    pub fn task(&self, task_id: &str) -> Option<&VerificationTask> {
        self.tasks.rows.get(task_id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &VerificationTask> {
        self.tasks.iter()
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn append_audit(&mut self, entry: AuditEntry) -> Result<(), StoreError> {
        let path = self.root.join(AUDIT_FILE);
        let mut line = serde_json::to_string(&entry).expect("audit entries serialize");
        line.push('\n');
        OpenOptions::new()
            .append(true)
            .create(true)
            .open(&path)
            .and_then(|mut f| f.write_all(line.as_bytes()))
            .map_err(|e| StoreError::io(&path, e))?;
        self.audit.push(entry);
        Ok(())
    }

    /// Removes labeled posts by key and rewrites `labeled.jsonl`. Keys with
    /// a task attached are refused.
    pub fn remove_labeled(&mut self, keys: &[LabeledKey]) -> Result<usize, StoreError> {
        let doomed: HashSet<&LabeledKey> = keys.iter().collect();
        if let Some(task) = self.tasks.iter().find(|t| doomed.contains(&t.labeled_key())) {
            return Err(StoreError::DanglingReference {
                kind: VerificationTask::KIND,
                target: "LabeledPost",
                key: task.task_id.clone(),
            });
        }
        let before = self.labeled.rows.len();
        self.labeled.rows.retain(|k, _| !doomed.contains(k));
        let removed = before - self.labeled.rows.len();
        if removed > 0 {
            self.labeled.rewrite()?;
        }
        Ok(removed)
    }

    /// Rewrites every data file with one line per live record.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        self.articles.rewrite()?;
        self.links.rewrite()?;
        self.posts.rewrite()?;
        self.labeled.rewrite()?;
        self.tasks.rewrite()
    }

    /// Path of a stored raw HTML document given its `html_ref`.
    pub fn html_path(&self, html_ref: &str) -> PathBuf {
        self.root.join(html_ref)
    }

    /// Writes raw article HTML and returns the `html_ref` to record.
    pub fn put_html(&mut self, news_id: &str, html: &str) -> Result<String, StoreError> {
        let html_ref = format!("{HTML_DIR}/{news_id}.html");
        let path = self.root.join(&html_ref);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        }
        fs::write(&path, html).map_err(|e| StoreError::io(&path, e))?;
        Ok(html_ref)
    }

    /// Order-independent serialization of every record kind, sorted by
    /// natural key. Two stores holding the same records dump identically.
    pub fn canonical_dump(&self) -> String {
        fn section<R: Record>(out: &mut String, table: &Table<R>) {
            let mut rows: Vec<_> = table.rows.iter().collect();
            rows.sort_by(|a, b| a.0.cmp(b.0));
            out.push_str(&format!("# {}\n", R::KIND));
            for (_, r) in rows {
                out.push_str(&serde_json::to_string(r).expect("records always serialize"));
                out.push('\n');
            }
        }
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&self.meta).expect("meta serializes"));
        out.push('\n');
        section(&mut out, &self.articles);
        section(&mut out, &self.links);
        section(&mut out, &self.posts);
        section(&mut out, &self.labeled);
        section(&mut out, &self.tasks);
        out
    }
}
