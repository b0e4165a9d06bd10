//! Domain records shared by every pipeline stage.
//!
//! Each record kind has a natural key used by the store for upserts:
//! articles by `news_id`, links by `(article, platform, post_uid)`, posts by
//! `(platform, post_uid)`, labeled posts by `(platform, post_uid, news_id)`
//! and verification tasks by `task_id`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Twitter,
    YouTube,
    Reddit,
    Facebook,
    Instagram,
    Wikipedia,
    Pinterest,
    TikTok,
    Gab,
    WhatsApp,
    Other,
}

impl Platform {
    pub const ALL: [Platform; 11] = [
        Platform::Twitter,
        Platform::YouTube,
        Platform::Reddit,
        Platform::Facebook,
        Platform::Instagram,
        Platform::Wikipedia,
        Platform::Pinterest,
        Platform::TikTok,
        Platform::Gab,
        Platform::WhatsApp,
        Platform::Other,
    ];

    /// Lowercase identifier used in file names, JSON and the sampler seed.
    pub fn slug(self) -> &'static str {
        match self {
            Platform::Twitter => "twitter",
            Platform::YouTube => "youtube",
            Platform::Reddit => "reddit",
            Platform::Facebook => "facebook",
            Platform::Instagram => "instagram",
            Platform::Wikipedia => "wikipedia",
            Platform::Pinterest => "pinterest",
            Platform::TikTok => "tiktok",
            Platform::Gab => "gab",
            Platform::WhatsApp => "whatsapp",
            Platform::Other => "other",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Platform::Twitter => "Twitter",
            Platform::YouTube => "YouTube",
            Platform::Reddit => "Reddit",
            Platform::Facebook => "Facebook",
            Platform::Instagram => "Instagram",
            Platform::Wikipedia => "Wikipedia",
            Platform::Pinterest => "Pinterest",
            Platform::TikTok => "TikTok",
            Platform::Gab => "Gab",
            Platform::WhatsApp => "WhatsApp",
            Platform::Other => "Other",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Platform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Platform::ALL
            .into_iter()
            .find(|p| p.slug() == lower)
            .ok_or_else(|| format!("unknown platform {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "text")]
    Text,
    #[serde(rename = "image")]
    Image,
    #[serde(rename = "text+image")]
    TextImage,
    #[serde(rename = "video")]
    Video,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
            Modality::TextImage => "text+image",
            Modality::Video => "video",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchStatus {
    Fetched,
    Deleted,
    Unavailable,
}

/// The four normalized verdict classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelClass {
    False,
    PartiallyFalse,
    True,
    Other,
}

impl LabelClass {
    pub const ALL: [LabelClass; 4] = [
        LabelClass::False,
        LabelClass::PartiallyFalse,
        LabelClass::True,
        LabelClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelClass::False => "false",
            LabelClass::PartiallyFalse => "partially_false",
            LabelClass::True => "true",
            LabelClass::Other => "other",
        }
    }
}

impl FromStr for LabelClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace([' ', '-'], "_");
        LabelClass::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| format!("unknown label class {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerificationState {
    Unverified,
    Sampled,
    Confirmed,
    Rejected,
}

impl VerificationState {
    fn stage(self) -> u8 {
        match self {
            VerificationState::Unverified => 0,
            VerificationState::Sampled => 1,
            VerificationState::Confirmed | VerificationState::Rejected => 2,
        }
    }

    /// Whether moving from `self` to `next` goes forward along
    /// unverified -> sampled -> {confirmed, rejected} (staying put is allowed).
    pub fn can_move_to(self, next: VerificationState) -> bool {
        self == next || next.stage() > self.stage()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskVerdict {
    Pending,
    Confirmed,
    Rejected,
}

/// `(platform, post_uid)`: identifies one logical post.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PostKey {
    pub platform: Platform,
    pub post_uid: String,
}

impl PostKey {
    pub fn new(platform: Platform, post_uid: impl Into<String>) -> Self {
        Self {
            platform,
            post_uid: post_uid.into(),
        }
    }
}

impl fmt::Display for PostKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.platform.slug(), self.post_uid)
    }
}

/// One fact-check article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub news_id: String,
    pub source_url: String,
    pub title: String,
    pub published_date: Option<NaiveDate>,
    pub body_text: String,
    pub verdict_raw: String,
    pub publisher: String,
    pub countries: Vec<String>,
    pub language: Option<String>,
    pub html_ref: String,
}

/// True when `id` is 1-4 uppercase ASCII letters followed by at least one digit.
pub fn is_valid_news_id(id: &str) -> bool {
    let letters = id.bytes().take_while(u8::is_ascii_uppercase).count();
    let rest = &id[letters..];
    (1..=4).contains(&letters) && !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
}

pub fn is_valid_acronym(acronym: &str) -> bool {
    (1..=4).contains(&acronym.len()) && acronym.bytes().all(|b| b.is_ascii_uppercase())
}

/// Splits a news id into its acronym and ordinal.
pub fn split_news_id(id: &str) -> Option<(&str, u64)> {
    if !is_valid_news_id(id) {
        return None;
    }
    let letters = id.bytes().take_while(u8::is_ascii_uppercase).count();
    let ordinal = id[letters..].parse().ok()?;
    Some((&id[..letters], ordinal))
}

impl NewsArticle {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !is_valid_news_id(&self.news_id) {
            return Err("news_id must be 1-4 uppercase letters followed by digits");
        }
        match url::Url::parse(&self.source_url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.has_host() => {}
            _ => return Err("source_url must be an absolute http(s) URL"),
        }
        if self.verdict_raw.trim().is_empty() {
            return Err("verdict_raw must be non-empty");
        }
        if let Some(lang) = &self.language {
            if lang.len() != 2 || !lang.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err("language must be two lowercase ASCII letters");
            }
        }
        Ok(())
    }

    pub fn acronym(&self) -> &str {
        let letters = self.news_id.bytes().take_while(u8::is_ascii_uppercase).count();
        &self.news_id[..letters]
    }
}

/// A platform-classified hyperlink found in an article body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialLink {
    pub article_id: String,
    pub platform: Platform,
    pub raw_url: String,
    pub canonical_url: String,
    pub post_uid: String,
    pub anchor_index: usize,
}

impl SocialLink {
    pub fn post_key(&self) -> PostKey {
        PostKey::new(self.platform, self.post_uid.clone())
    }
}

/// Fetched (or attempted) content of one post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialPost {
    pub platform: Platform,
    pub post_uid: String,
    pub modality: Option<Modality>,
    pub text_content: String,
    pub media_refs: Vec<String>,
    pub author: String,
    pub posted_at: Option<DateTime<Utc>>,
    pub metrics: BTreeMap<String, u64>,
    pub fetch_status: FetchStatus,
    pub fetched_at: DateTime<Utc>,
}

impl SocialPost {
    pub fn key(&self) -> PostKey {
        PostKey::new(self.platform, self.post_uid.clone())
    }

    /// Placeholder record for a post that could not be retrieved.
    pub fn missing(key: &PostKey, status: FetchStatus, at: DateTime<Utc>) -> Self {
        Self {
            platform: key.platform,
            post_uid: key.post_uid.clone(),
            modality: None,
            text_content: String::new(),
            media_refs: Vec::new(),
            author: String::new(),
            posted_at: None,
            metrics: BTreeMap::new(),
            fetch_status: status,
            fetched_at: at,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.post_uid.is_empty() {
            return Err("post_uid must be non-empty");
        }
        if self.fetch_status == FetchStatus::Fetched {
            if self.text_content.is_empty() && self.media_refs.is_empty() {
                return Err("a fetched post needs text_content or media_refs");
            }
            if self.modality.is_none() {
                return Err("a fetched post carries exactly one modality");
            }
        }
        Ok(())
    }
}

/// Article metadata copied into each labeled post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enrichment {
    pub title: String,
    pub publisher: String,
    pub published_date: Option<NaiveDate>,
    pub language: Option<String>,
    pub countries: Vec<String>,
    pub source_url: String,
}

impl Enrichment {
    pub fn from_article(article: &NewsArticle) -> Self {
        Self {
            title: article.title.clone(),
            publisher: article.publisher.clone(),
            published_date: article.published_date,
            language: article.language.clone(),
            countries: article.countries.clone(),
            source_url: article.source_url.clone(),
        }
    }
}

/// A (post, article) pair carrying the propagated verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPost {
    pub platform: Platform,
    pub post_uid: String,
    pub news_id: String,
    pub label_raw: String,
    pub label_norm: LabelClass,
    pub verification_state: VerificationState,
    pub enrichment: Enrichment,
}

/// `(platform, post_uid, news_id)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledKey {
    pub post: PostKey,
    pub news_id: String,
}

impl LabeledPost {
    pub fn post_key(&self) -> PostKey {
        PostKey::new(self.platform, self.post_uid.clone())
    }

    pub fn key(&self) -> LabeledKey {
        LabeledKey {
            post: self.post_key(),
            news_id: self.news_id.clone(),
        }
    }
}

/// One human-review work item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationTask {
    pub task_id: String,
    pub platform: Platform,
    pub post_uid: String,
    pub news_id: String,
    pub sampled_at: DateTime<Utc>,
    pub verdict: TaskVerdict,
    pub reviewer: Option<String>,
    pub reviewed_at: Option<DateTime<Utc>>,
    pub note: String,
}

impl VerificationTask {
    pub fn labeled_key(&self) -> LabeledKey {
        LabeledKey {
            post: PostKey::new(self.platform, self.post_uid.clone()),
            news_id: self.news_id.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.task_id.is_empty() {
            return Err("task_id must be non-empty");
        }
        if self.verdict != TaskVerdict::Pending && (self.reviewer.is_none() || self.reviewed_at.is_none()) {
            return Err("a decided task needs reviewer and reviewed_at");
        }
        Ok(())
    }
}
