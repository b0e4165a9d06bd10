//! Verdict propagation from articles to posts, label normalization and
//! post deduplication.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::model::{
    FetchStatus, LabelClass, LabeledKey, LabeledPost, NewsArticle, PostKey, SocialLink, VerificationState,
};
use crate::store::{AuditEntry, AuditEvent, Store, StoreError};
use crate::text::collapse_whitespace;

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("post {0} is missing or was not fetched")]
    MissingPost(PostKey),
    #[error("article {0} is missing")]
    MissingArticle(String),
    #[error("invalid label mapping: {0}")]
    MappingInvalid(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

const DEFAULT_MAP: [(&str, LabelClass); 14] = [
    ("false", LabelClass::False),
    ("fake", LabelClass::False),
    ("incorrect", LabelClass::False),
    ("pants on fire", LabelClass::False),
    ("no evidence", LabelClass::False),
    ("partially false", LabelClass::PartiallyFalse),
    ("partly false", LabelClass::PartiallyFalse),
    ("misleading", LabelClass::PartiallyFalse),
    ("mostly false", LabelClass::PartiallyFalse),
    ("half true", LabelClass::PartiallyFalse),
    ("missing context", LabelClass::PartiallyFalse),
    ("true", LabelClass::True),
    ("correct", LabelClass::True),
    ("mostly true", LabelClass::True),
];

fn fold(verdict: &str) -> String {
    collapse_whitespace(verdict).to_lowercase()
}

/// Case-folded verdict string to class, total through `default_class`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    map: HashMap<String, LabelClass>,
    default_class: LabelClass,
}

impl Default for LabelMapping {
    fn default() -> Self {
        Self {
            map: DEFAULT_MAP.iter().map(|(k, c)| (k.to_string(), *c)).collect(),
            default_class: LabelClass::Other,
        }
    }
}

#[derive(Deserialize, Serialize)]
struct MappingFile {
    map: BTreeMap<String, LabelClass>,
    #[serde(default = "other")]
    default: LabelClass,
}

fn other() -> LabelClass {
    LabelClass::Other
}

impl LabelMapping {
    /// Entries from a mapping file, layered over the default mapping.
    pub fn from_json(json: &str) -> Result<Self, LabelError> {
        let file: MappingFile = serde_json::from_str(json).map_err(|e| LabelError::MappingInvalid(e.to_string()))?;
        let mut mapping = Self::default();
        for (verdict, class) in file.map {
            let key = fold(&verdict);
            if key.is_empty() {
                return Err(LabelError::MappingInvalid("empty verdict key".into()));
            }
            mapping.map.insert(key, class);
        }
        mapping.default_class = file.default;
        Ok(mapping)
    }

    pub fn load(path: &Path) -> Result<Self, LabelError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| LabelError::MappingInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn default_class(&self) -> LabelClass {
        self.default_class
    }

    pub fn get(&self, verdict: &str) -> Option<LabelClass> {
        self.map.get(&fold(verdict)).copied()
    }
}

/// Trim and case-fold, then look up; anything unmapped gets the default.
pub fn normalize_label(label_raw: &str, mapping: &LabelMapping) -> LabelClass {
    mapping.get(label_raw).unwrap_or(mapping.default_class)
}

fn labeled_from(article: &NewsArticle, key: &PostKey, mapping: &LabelMapping) -> LabeledPost {
    LabeledPost {
        platform: key.platform,
        post_uid: key.post_uid.clone(),
        news_id: article.news_id.clone(),
        label_raw: article.verdict_raw.clone(),
        label_norm: normalize_label(&article.verdict_raw, mapping),
        verification_state: VerificationState::Unverified,
        enrichment: crate::model::Enrichment::from_article(article),
    }
}

/// Builds the labeled record for a link: the article's verdict and metadata
/// applied to the linked post.
pub fn propagate_label(link: &SocialLink, store: &Store, mapping: &LabelMapping) -> Result<LabeledPost, LabelError> {
    let key = PostKey::new(link.platform, link.post_uid.clone());
    let article = store
        .article(&link.article_id)
        .ok_or_else(|| LabelError::MissingArticle(link.article_id.clone()))?;
    match store.post(&key) {
        Some(p) if p.fetch_status == FetchStatus::Fetched => Ok(labeled_from(article, &key, mapping)),
        _ => Err(LabelError::MissingPost(key)),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LabelReport {
    pub labeled: usize,
    /// Existing records whose label or enrichment was refreshed.
    pub updated: usize,
    pub unchanged: usize,
    /// Pairs a previous dedupe dropped.
    pub previously_dropped: usize,
    /// Links whose post was deleted, unavailable or never fetched.
    pub missing_post: usize,
}

/// Labels every (fetched post, citing article) pair. Existing records keep
/// their verification state but pick up label and enrichment changes, so
/// rerunning with a new mapping keeps `label_norm` recomputable.
pub fn label_all(store: &mut Store, mapping: &LabelMapping) -> Result<LabelReport, LabelError> {
    let dropped: HashSet<LabeledKey> = store
        .audit()
        .iter()
        .filter_map(|e| match &e.event {
            AuditEvent::DuplicateDropped {
                platform,
                post_uid,
                dropped_news_id,
                ..
            } => Some(LabeledKey {
                post: PostKey::new(*platform, post_uid.clone()),
                news_id: dropped_news_id.clone(),
            }),
            _ => None,
        })
        .collect();
    let links: Vec<SocialLink> = store.links().cloned().collect();
    let mut report = LabelReport::default();
    let mut seen = HashSet::new();
    for link in &links {
        let key = LabeledKey {
            post: PostKey::new(link.platform, link.post_uid.clone()),
            news_id: link.article_id.clone(),
        };
        if !seen.insert(key.clone()) {
            continue;
        }
        if dropped.contains(&key) {
            report.previously_dropped += 1;
            continue;
        }
        let mut fresh = match propagate_label(link, store, mapping) {
            Ok(l) => l,
            Err(LabelError::MissingPost(_)) => {
                report.missing_post += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        match store.labeled_post(&key) {
            None => {
                store.upsert(fresh)?;
                report.labeled += 1;
            }
            Some(existing) => {
                fresh.verification_state = existing.verification_state;
                if *existing == fresh {
                    report.unchanged += 1;
                } else {
                    store.upsert(fresh)?;
                    report.updated += 1;
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DedupeReport {
    pub total_labeled: usize,
    pub unique_kept: usize,
    pub duplicates_dropped: usize,
}

/// Ranking for duplicate resolution: earliest article date first (undated
/// last), then the lexicographically smallest news_id.
pub fn dedupe_order(a: &LabeledPost, b: &LabeledPost) -> Ordering {
    let date = |l: &LabeledPost| (l.enrichment.published_date.is_none(), l.enrichment.published_date);
    date(a).cmp(&date(b)).then_with(|| a.news_id.cmp(&b.news_id))
}

/// Keeps one labeled record per post. Records already under review are
/// never dropped; the winner is the best-ranked of those if any exist.
/// Every dropped record is written to the audit log.
pub fn dedupe(store: &mut Store, clock: &dyn Clock) -> Result<DedupeReport, LabelError> {
    let mut groups: BTreeMap<PostKey, Vec<&LabeledPost>> = BTreeMap::new();
    for l in store.labeled_posts() {
        groups.entry(l.post_key()).or_default().push(l);
    }
    let total_labeled = store.labeled_posts().count();
    let mut drops: Vec<(LabeledPost, LabeledPost)> = Vec::new();
    for (key, mut group) in groups {
        if group.len() < 2 {
            continue;
        }
        group.sort_by(|a, b| {
            let protected = |l: &LabeledPost| l.verification_state == VerificationState::Unverified;
            protected(a).cmp(&protected(b)).then_with(|| dedupe_order(a, b))
        });
        let kept = group[0];
        for other in &group[1..] {
            if other.verification_state != VerificationState::Unverified {
                log::warn!("{key}: {} is under review and cannot be dropped", other.news_id);
                continue;
            }
            drops.push(((*other).clone(), kept.clone()));
        }
    }
    let now = clock.now();
    let keys: Vec<LabeledKey> = drops.iter().map(|(d, _)| d.key()).collect();
    for (dropped, kept) in &drops {
        store.append_audit(AuditEntry {
            at: now,
            event: AuditEvent::DuplicateDropped {
                platform: dropped.platform,
                post_uid: dropped.post_uid.clone(),
                dropped_news_id: dropped.news_id.clone(),
                kept_news_id: kept.news_id.clone(),
                label_conflict: dropped.label_norm != kept.label_norm,
            },
        })?;
    }
    store.remove_labeled(&keys)?;
    Ok(DedupeReport {
        total_labeled,
        unique_kept: total_labeled - drops.len(),
        duplicates_dropped: drops.len(),
    })
}
