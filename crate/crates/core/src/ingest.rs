//! Fact-check article ingest: source manifests, parser profiles and the
//! HTML-to-`NewsArticle` extraction.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use scraper::{ElementRef, Html, Node, Selector};
use serde::{Deserialize, Serialize};

use crate::model::{is_valid_acronym, split_news_id, NewsArticle};
use crate::store::{Store, StoreError};
use crate::text::{collapse_whitespace, defuse_tags};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error("invalid parser profile: {0}")]
    ProfileInvalid(String),
    #[error("fixture missing: {0}")]
    FixtureMissing(String),
    #[error("no match for mandatory field {0}")]
    FieldMissing(ProfileField),
    #[error("unparseable date {0:?}")]
    UnparseableDate(String),
    #[error("acronym {0:?} must be 1-4 uppercase letters")]
    BadAcronym(String),
    #[error("news id sequence must start at 1")]
    BadSequence,
    #[error("empty HTML document")]
    EmptyDocument,
    #[error("could not load {url}: {reason}")]
    LoadFailed { url: String, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileField {
    Title,
    PublishedDate,
    Body,
    Verdict,
    Countries,
    Publisher,
}

impl ProfileField {
    pub const ALL: [ProfileField; 6] = [
        ProfileField::Title,
        ProfileField::PublishedDate,
        ProfileField::Body,
        ProfileField::Verdict,
        ProfileField::Countries,
        ProfileField::Publisher,
    ];
}

impl fmt::Display for ProfileField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProfileField::Title => "title",
            ProfileField::PublishedDate => "published_date",
            ProfileField::Body => "body",
            ProfileField::Verdict => "verdict",
            ProfileField::Countries => "countries",
            ProfileField::Publisher => "publisher",
        };
        f.write_str(s)
    }
}

/// Where a field lives: a CSS selector plus either an attribute to read or
/// `"text": true` for the element text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldRule {
    pub selector: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<bool>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    selector: Selector,
    attribute: Option<String>,
}

/// Source-specific extraction rules, loaded from JSON so new sources need no
/// rebuild.
#[derive(Debug, Clone)]
pub struct ParserProfile {
    pub profile_name: String,
    pub selectors: BTreeMap<ProfileField, FieldRule>,
    compiled: BTreeMap<ProfileField, CompiledRule>,
}

impl ParserProfile {
    pub fn new(
        profile_name: impl Into<String>,
        selectors: BTreeMap<ProfileField, FieldRule>,
    ) -> Result<Self, IngestError> {
        let mut compiled = BTreeMap::new();
        for field in ProfileField::ALL {
            let rule = selectors
                .get(&field)
                .ok_or_else(|| IngestError::ProfileInvalid(format!("missing rule for {field}")))?;
            let selector = Selector::parse(&rule.selector)
                .map_err(|e| IngestError::ProfileInvalid(format!("{field}: bad selector {:?}: {e}", rule.selector)))?;
            let attribute = match (&rule.attribute, rule.text) {
                (Some(a), None | Some(false)) => Some(a.clone()),
                (None, Some(true)) => None,
                _ => {
                    return Err(IngestError::ProfileInvalid(format!(
                        "{field}: give exactly one of \"attribute\" or \"text\": true"
                    )))
                }
            };
            compiled.insert(field, CompiledRule { selector, attribute });
        }
        Ok(Self {
            profile_name: profile_name.into(),
            selectors,
            compiled,
        })
    }

    pub fn from_json(profile_name: &str, json: &str) -> Result<Self, IngestError> {
        let selectors: BTreeMap<ProfileField, FieldRule> =
            serde_json::from_str(json).map_err(|e| IngestError::ProfileInvalid(e.to_string()))?;
        Self::new(profile_name, selectors)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| IngestError::ProfileInvalid(format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_json(&name, &json)
    }

    pub fn body_selector(&self) -> &str {
        &self.selectors[&ProfileField::Body].selector
    }
}

/// Text content of an element, skipping scripts and styles.
fn element_text(el: ElementRef) -> String {
    let mut out = String::new();
    for node in el.descendants() {
        if let Node::Text(t) = node.value() {
            let hidden = node.ancestors().any(|a| {
                a.value()
                    .as_element()
                    .is_some_and(|e| matches!(e.name(), "script" | "style" | "noscript" | "template"))
            });
            if !hidden {
                out.push_str(t);
                out.push(' ');
            }
        }
    }
    out
}

/// All raw values a rule yields, in document order.
fn rule_values(doc: &Html, rule: &CompiledRule) -> Vec<String> {
    doc.select(&rule.selector)
        .filter_map(|el| match &rule.attribute {
            Some(attr) => el.value().attr(attr).map(str::to_string),
            None => Some(element_text(el)),
        })
        .map(|v| collapse_whitespace(&v))
        .filter(|v| !v.is_empty())
        .collect()
}

/// Everything a profile extracts from one page, before mandatory checks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct RawFields {
    title: Option<String>,
    published_date: Option<String>,
    body: Option<String>,
    verdict: Option<String>,
    publisher: Option<String>,
    countries: Vec<String>,
}

fn extract_fields(html: &str, profile: &ParserProfile) -> Result<RawFields, IngestError> {
    if html.trim().is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    let doc = Html::parse_document(html);
    let first = |field| rule_values(&doc, &profile.compiled[&field]).into_iter().next();
    let body = rule_values(&doc, &profile.compiled[&ProfileField::Body]);
    let mut seen = HashSet::new();
    let countries = rule_values(&doc, &profile.compiled[&ProfileField::Countries])
        .iter()
        .flat_map(|v| v.split(','))
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty() && seen.insert(c.clone()))
        .collect();
    Ok(RawFields {
        title: first(ProfileField::Title),
        published_date: first(ProfileField::PublishedDate),
        body: (!body.is_empty()).then(|| defuse_tags(&body.join(" "))),
        verdict: first(ProfileField::Verdict),
        publisher: first(ProfileField::Publisher),
        countries,
    })
}

/// An article as parsed from HTML: everything except `news_id`, `language`
/// and `html_ref`, which later stages assign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedArticle {
    pub title: String,
    pub published_date: Option<NaiveDate>,
    pub body_text: String,
    pub verdict_raw: String,
    pub publisher: Option<String>,
    pub countries: Vec<String>,
}

fn finish(fields: RawFields) -> Result<ParsedArticle, IngestError> {
    let title = fields.title.ok_or(IngestError::FieldMissing(ProfileField::Title))?;
    let body_text = fields.body.ok_or(IngestError::FieldMissing(ProfileField::Body))?;
    let verdict_raw = fields.verdict.ok_or(IngestError::FieldMissing(ProfileField::Verdict))?;
    let published_date = fields.published_date.as_deref().map(parse_date).transpose()?;
    Ok(ParsedArticle {
        title,
        published_date,
        body_text,
        verdict_raw,
        publisher: fields.publisher,
        countries: fields.countries,
    })
}

/// Extracts article fields from `html`. Title, body and verdict are
/// mandatory; the verdict string is kept exactly as published.
pub fn parse_article(html: &str, profile: &ParserProfile) -> Result<ParsedArticle, IngestError> {
    finish(extract_fields(html, profile)?)
}

/// `acronym` followed by the decimal sequence number, e.g. `PY9`.
pub fn assign_news_id(source_acronym: &str, sequence: u64) -> Result<String, IngestError> {
    if !is_valid_acronym(source_acronym) {
        return Err(IngestError::BadAcronym(source_acronym.to_string()));
    }
    if sequence == 0 {
        return Err(IngestError::BadSequence);
    }
    Ok(format!("{source_acronym}{sequence}"))
}

const DATE_FORMATS: [&str; 7] = [
    "%Y-%m-%d",
    "%d %B %Y",
    "%d %b %Y",
    "%B %d, %Y",
    "%b %d, %Y",
    "%B %d %Y",
    "%d.%m.%Y",
];

/// Accepts `DD Month YYYY`, `Month DD, YYYY` and ISO 8601 dates or
/// datetimes.
pub fn parse_date(raw: &str) -> Result<NaiveDate, IngestError> {
    let s = collapse_whitespace(raw);
    for fmt in DATE_FORMATS {
        if let Ok(d) = NaiveDate::parse_from_str(&s, fmt) {
            return Ok(d);
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(&s) {
        return Ok(dt.date_naive());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(&s, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt.date());
    }
    Err(IngestError::UnparseableDate(raw.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_url: String,
    #[serde(default)]
    pub html_path: Option<String>,
    #[serde(default)]
    pub verdict_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceManifest {
    pub source_name: String,
    pub source_acronym: String,
    pub parser_profile: String,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths resolve against (the manifest's own).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SourceManifest {
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| IngestError::ManifestInvalid(format!("{}: {e}", path.display())))?;
        let mut manifest: SourceManifest =
            serde_json::from_str(&json).map_err(|e| IngestError::ManifestInvalid(e.to_string()))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !is_valid_acronym(&self.source_acronym) {
            return Err(IngestError::ManifestInvalid(format!(
                "source_acronym {:?} must be 1-4 uppercase letters",
                self.source_acronym
            )));
        }
        if self.entries.is_empty() {
            return Err(IngestError::ManifestInvalid("entries is empty".into()));
        }
        let mut urls = HashSet::new();
        for e in &self.entries {
            match url::Url::parse(&e.source_url) {
                Ok(u) if matches!(u.scheme(), "http" | "https") => {}
                _ => {
                    return Err(IngestError::ManifestInvalid(format!(
                        "source_url {:?} is not an absolute http(s) URL",
                        e.source_url
                    )))
                }
            }
            if !urls.insert(e.source_url.as_str()) {
                return Err(IngestError::ManifestInvalid(format!(
                    "duplicate source_url {}",
                    e.source_url
                )));
            }
        }
        Ok(())
    }

    /// Profile file named by `parser_profile`: a relative `.json` path, or a
    /// bare name resolved to `<name>.json` beside the manifest.
    pub fn profile_path(&self) -> PathBuf {
        if self.parser_profile.ends_with(".json") {
            self.base_dir.join(&self.parser_profile)
        } else {
            self.base_dir.join(format!("{}.json", self.parser_profile))
        }
    }

    pub fn load_profile(&self) -> Result<ParserProfile, IngestError> {
        let mut profile = ParserProfile::load(&self.profile_path())?;
        if !self.parser_profile.ends_with(".json") {
            profile.profile_name = self.parser_profile.clone();
        }
        Ok(profile)
    }
}

/// Source of raw article HTML.
pub trait DocumentLoader {
    fn load(&self, entry: &ManifestEntry) -> Result<String, IngestError>;
}

/// Reads `html_path` relative to a base directory.
#[derive(Debug, Clone)]
pub struct FixtureLoader {
    pub base_dir: PathBuf,
}

impl DocumentLoader for FixtureLoader {
    fn load(&self, entry: &ManifestEntry) -> Result<String, IngestError> {
        let rel = entry
            .html_path
            .as_ref()
            .ok_or_else(|| IngestError::FixtureMissing(format!("{} has no html_path", entry.source_url)))?;
        let path = self.base_dir.join(rel);
        std::fs::read_to_string(&path).map_err(|_| IngestError::FixtureMissing(path.display().to_string()))
    }
}

/// Fetches `source_url` over HTTP.
#[derive(Debug, Clone)]
pub struct HttpLoader {
    client: reqwest::blocking::Client,
}

impl HttpLoader {
    pub fn new() -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("amused/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| IngestError::LoadFailed {
                url: String::new(),
                reason: e.to_string(),
            })?;
        Ok(Self { client })
    }
}

impl DocumentLoader for HttpLoader {
    fn load(&self, entry: &ManifestEntry) -> Result<String, IngestError> {
        let fail = |reason: String| IngestError::LoadFailed {
            url: entry.source_url.clone(),
            reason,
        };
        let resp = self
            .client
            .get(&entry.source_url)
            .send()
            .map_err(|e| fail(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(fail(format!("HTTP {}", resp.status())));
        }
        resp.text().map_err(|e| fail(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    FixtureMissing,
    FieldMissing,
    UnparseableDate,
    EmptyDocument,
    LoadFailed,
    InvariantViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub source_url: String,
    pub kind: FailureKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub articles_created: usize,
    pub skipped_existing: usize,
    pub failures: Vec<IngestFailure>,
}

/// Parses every manifest entry into a stored `NewsArticle`. Ids continue
/// from the highest ordinal already stored for the acronym and are only
/// consumed by successful entries. Entries whose URL is already stored are
/// skipped. Per-entry problems are reported, not fatal.
pub fn ingest_manifest(
    manifest: &SourceManifest,
    profile: &ParserProfile,
    loader: &dyn DocumentLoader,
    store: &mut Store,
) -> Result<IngestReport, IngestError> {
    manifest.validate()?;
    let acronym = manifest.source_acronym.as_str();
    store.set_article_scope(acronym, profile.body_selector())?;

    let mut next = store
        .articles()
        .filter_map(|a| split_news_id(&a.news_id))
        .filter(|(acr, _)| *acr == acronym)
        .map(|(_, n)| n)
        .max()
        .unwrap_or(0)
        + 1;
    let known: HashSet<String> = store.articles().map(|a| a.source_url.clone()).collect();

    let mut report = IngestReport::default();
    for entry in &manifest.entries {
        if known.contains(&entry.source_url) {
            report.skipped_existing += 1;
            continue;
        }
        let fail = |kind, e: IngestError| IngestFailure {
            source_url: entry.source_url.clone(),
            kind,
            detail: e.to_string(),
        };
        let html = match loader.load(entry) {
            Ok(h) => h,
            Err(e @ IngestError::FixtureMissing(_)) => {
                report.failures.push(fail(FailureKind::FixtureMissing, e));
                continue;
            }
            Err(e) => {
                report.failures.push(fail(FailureKind::LoadFailed, e));
                continue;
            }
        };
        let parsed = extract_fields(&html, profile).and_then(|mut fields| {
            if fields.verdict.is_none() {
                fields.verdict = entry.verdict_hint.clone().filter(|v| !v.trim().is_empty());
            }
            finish(fields)
        });
        let parsed = match parsed {
            Ok(p) => p,
            Err(e) => {
                let kind = match e {
                    IngestError::FieldMissing(_) => FailureKind::FieldMissing,
                    IngestError::UnparseableDate(_) => FailureKind::UnparseableDate,
                    IngestError::EmptyDocument => FailureKind::EmptyDocument,
                    _ => FailureKind::LoadFailed,
                };
                report.failures.push(fail(kind, e));
                continue;
            }
        };
        let news_id = assign_news_id(acronym, next)?;
        let mut article = NewsArticle {
            html_ref: String::new(),
            news_id,
            source_url: entry.source_url.clone(),
            title: parsed.title,
            published_date: parsed.published_date,
            body_text: parsed.body_text,
            verdict_raw: parsed.verdict_raw,
            publisher: parsed.publisher.unwrap_or_else(|| manifest.source_name.clone()),
            countries: parsed.countries,
            language: None,
        };
        if let Err(invariant) = article.validate() {
            report.failures.push(IngestFailure {
                source_url: entry.source_url.clone(),
                kind: FailureKind::InvariantViolation,
                detail: invariant.to_string(),
            });
            continue;
        }
        article.html_ref = store.put_html(&article.news_id, &html)?;
        store.upsert(article)?;
        next += 1;
        report.articles_created += 1;
    }
    Ok(report)
}
