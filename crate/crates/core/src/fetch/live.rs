//! Thin adapters for the public Twitter, YouTube and Reddit APIs. Off by
//! default; credentials come from the environment.

use std::collections::BTreeMap;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde_json::Value;

use super::{FetchError, FetchOutcome, Media, MediaKind, PostContent, PostFetcher};
use crate::model::{Platform, PostKey};

pub const TWITTER_TOKEN_VAR: &str = "AMUSED_TWITTER_BEARER_TOKEN";
pub const YOUTUBE_KEY_VAR: &str = "AMUSED_YOUTUBE_API_KEY";

/// Conservative default request rates for the live APIs.
pub fn default_rate(platform: Platform) -> f64 {
    match platform {
        Platform::Twitter => 0.9,
        Platform::YouTube => 5.0,
        Platform::Reddit => 0.5,
        _ => 1.0,
    }
}

fn client() -> Result<Client, FetchError> {
    Client::builder()
        .user_agent(concat!("amused/", env!("CARGO_PKG_VERSION")))
        .timeout(Duration::from_secs(30))
        .build()
        .map_err(|e| FetchError::Config(e.to_string()))
}

fn env_var(name: &str) -> Result<String, FetchError> {
    std::env::var(name)
        .ok()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| FetchError::Config(format!("{name} is not set")))
}

fn api_url(base: &str, params: &[(&str, &str)]) -> Result<url::Url, FetchError> {
    url::Url::parse_with_params(base, params).map_err(|e| FetchError::Failed(e.to_string()))
}

fn retry_after(resp: &Response) -> Option<Duration> {
    let header = |name: &str| resp.headers().get(name)?.to_str().ok()?.parse::<i64>().ok();
    if let Some(secs) = header("retry-after") {
        return Some(Duration::from_secs(secs.max(0) as u64));
    }
    let reset = header("x-rate-limit-reset")?;
    let wait = reset - Utc::now().timestamp();
    Some(Duration::from_secs(wait.max(0) as u64))
}

fn json_body(resp: Response) -> Result<Value, FetchError> {
    resp.json().map_err(|e| FetchError::Failed(e.to_string()))
}

/// A u64 from a JSON number or numeric string.
fn count(v: &Value) -> Option<u64> {
    v.as_u64().or_else(|| v.as_str()?.parse().ok())
}

fn rfc3339(v: &Value) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(v.as_str()?)
        .ok()
        .map(|d| d.with_timezone(&Utc))
}

pub struct TwitterFetcher {
    client: Client,
    token: String,
}

impl TwitterFetcher {
    pub fn from_env() -> Result<Self, FetchError> {
        Ok(Self {
            client: client()?,
            token: env_var(TWITTER_TOKEN_VAR)?,
        })
    }
}

/// Interprets a v2 `GET /tweets/:id` response body.
pub fn parse_tweet(body: &Value) -> FetchOutcome {
    let Some(data) = body.get("data") else {
        return FetchOutcome::Deleted;
    };
    let mut metrics = BTreeMap::new();
    if let Some(m) = data.get("public_metrics") {
        for (field, name) in [
            ("like_count", "likes"),
            ("retweet_count", "retweets"),
            ("reply_count", "replies"),
            ("quote_count", "quotes"),
        ] {
            if let Some(n) = m.get(field).and_then(count) {
                metrics.insert(name.to_string(), n);
            }
        }
    }
    let includes = body.get("includes");
    let author = includes
        .and_then(|i| i.get("users")?.as_array()?.first()?.get("username")?.as_str())
        .map(|u| format!("@{u}"))
        .unwrap_or_default();
    let media = includes
        .and_then(|i| i.get("media")?.as_array().cloned())
        .unwrap_or_default()
        .iter()
        .filter_map(|m| {
            let kind = match m.get("type")?.as_str()? {
                "photo" => MediaKind::Image,
                _ => MediaKind::Video,
            };
            let reference = m
                .get("url")
                .or_else(|| m.get("preview_image_url"))
                .or_else(|| m.get("media_key"))?
                .as_str()?
                .to_string();
            Some(Media { kind, reference })
        })
        .collect();
    FetchOutcome::Fetched(PostContent {
        text_content: data.get("text").and_then(Value::as_str).unwrap_or_default().to_string(),
        media,
        author,
        posted_at: data.get("created_at").and_then(rfc3339),
        metrics,
    })
}

impl PostFetcher for TwitterFetcher {
    fn fetch(&self, key: &PostKey) -> Result<FetchOutcome, FetchError> {
        let url = api_url(
            &format!("https://api.twitter.com/2/tweets/{}", key.post_uid),
            &[
                ("tweet.fields", "created_at,public_metrics,attachments"),
                ("expansions", "author_id,attachments.media_keys"),
                ("user.fields", "username"),
                ("media.fields", "type,url,preview_image_url"),
            ],
        )?;
        let resp = self
            .client
            .get(url)
            .bearer_auth(&self.token)
            .send()
            .map_err(|e| FetchError::Failed(e.to_string()))?;
        match resp.status() {
            StatusCode::TOO_MANY_REQUESTS => Err(FetchError::RateLimited {
                retry_after: retry_after(&resp),
            }),
            StatusCode::NOT_FOUND => Ok(FetchOutcome::Deleted),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Ok(FetchOutcome::Unavailable),
            s if s.is_success() => Ok(parse_tweet(&json_body(resp)?)),
            s => Err(FetchError::Failed(format!("HTTP {s}"))),
        }
    }
}

pub struct YouTubeFetcher {
    client: Client,
    api_key: String,
}

impl YouTubeFetcher {
    pub fn from_env() -> Result<Self, FetchError> {
        Ok(Self {
            client: client()?,
            api_key: env_var(YOUTUBE_KEY_VAR)?,
        })
    }
}

/// Interprets a Data API v3 `videos.list` response body for one id.
pub fn parse_video(video_id: &str, body: &Value) -> FetchOutcome {
    let Some(item) = body.get("items").and_then(Value::as_array).and_then(|a| a.first()) else {
        return FetchOutcome::Deleted;
    };
    let snippet = item.get("snippet");
    let text = |field| {
        snippet
            .and_then(|s| s.get(field))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string()
    };
    let mut metrics = BTreeMap::new();
    if let Some(stats) = item.get("statistics").and_then(Value::as_object) {
        for (field, name) in [
            ("viewCount", "views"),
            ("likeCount", "likes"),
            ("dislikeCount", "dislikes"),
            ("commentCount", "comments"),
        ] {
            if let Some(n) = stats.get(field).and_then(count) {
                metrics.insert(name.to_string(), n);
            }
        }
    }
    FetchOutcome::Fetched(PostContent {
        text_content: text("title"),
        media: vec![Media {
            kind: MediaKind::Video,
            reference: format!("https://www.youtube.com/watch?v={video_id}"),
        }],
        author: text("channelTitle"),
        posted_at: snippet.and_then(|s| s.get("publishedAt")).and_then(rfc3339),
        metrics,
    })
}

fn quota_exceeded(body: &Value) -> bool {
    body.pointer("/error/errors")
        .and_then(Value::as_array)
        .is_some_and(|errs| {
            errs.iter().any(|e| {
                matches!(
                    e.get("reason").and_then(Value::as_str),
                    Some("quotaExceeded" | "rateLimitExceeded")
                )
            })
        })
}

impl PostFetcher for YouTubeFetcher {
    fn fetch(&self, key: &PostKey) -> Result<FetchOutcome, FetchError> {
        let url = api_url(
            "https://www.googleapis.com/youtube/v3/videos",
            &[
                ("part", "snippet,statistics"),
                ("id", key.post_uid.as_str()),
                ("key", self.api_key.as_str()),
            ],
        )?;
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| FetchError::Failed(e.to_string()))?;
        let status = resp.status();
        if status.is_success() {
            return Ok(parse_video(&key.post_uid, &json_body(resp)?));
        }
        let wait = retry_after(&resp);
        let body = json_body(resp).unwrap_or(Value::Null);
        if status == StatusCode::TOO_MANY_REQUESTS || quota_exceeded(&body) {
            return Err(FetchError::RateLimited { retry_after: wait });
        }
        Err(FetchError::Failed(format!("HTTP {status}")))
    }
}

pub struct RedditFetcher {
    client: Client,
}

impl RedditFetcher {
    pub fn new() -> Result<Self, FetchError> {
        Ok(Self { client: client()? })
    }
}

/// Interprets `/r/<name>/about.json`; the uid of a Reddit link is its
/// subreddit.
pub fn parse_subreddit(body: &Value) -> FetchOutcome {
    let Some(data) = body.get("data") else {
        return FetchOutcome::Deleted;
    };
    let field = |name| data.get(name).and_then(Value::as_str).unwrap_or_default();
    let text = [field("title"), field("public_description")]
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    let mut metrics = BTreeMap::new();
    if let Some(n) = data.get("subscribers").and_then(count) {
        metrics.insert("subscribers".to_string(), n);
    }
    let posted_at = data
        .get("created_utc")
        .and_then(Value::as_f64)
        .and_then(|t| Utc.timestamp_opt(t as i64, 0).single());
    FetchOutcome::Fetched(PostContent {
        text_content: text,
        media: Vec::new(),
        author: field("display_name_prefixed").to_string(),
        posted_at,
        metrics,
    })
}

impl PostFetcher for RedditFetcher {
    fn fetch(&self, key: &PostKey) -> Result<FetchOutcome, FetchError> {
        let url = format!("https://www.reddit.com/r/{}/about.json", key.post_uid);
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| FetchError::Failed(e.to_string()))?;
        match resp.status() {
            StatusCode::TOO_MANY_REQUESTS => Err(FetchError::RateLimited {
                retry_after: retry_after(&resp),
            }),
            StatusCode::NOT_FOUND => Ok(FetchOutcome::Deleted),
            StatusCode::FORBIDDEN => Ok(FetchOutcome::Unavailable),
            s if s.is_success() => Ok(parse_subreddit(&json_body(resp)?)),
            s => Err(FetchError::Failed(format!("HTTP {s}"))),
        }
    }
}

/// Builds the live adapter for `platform`, if one exists.
pub fn live_fetcher(platform: Platform) -> Result<Box<dyn PostFetcher>, FetchError> {
    Ok(match platform {
        Platform::Twitter => Box::new(TwitterFetcher::from_env()?),
        Platform::YouTube => Box::new(YouTubeFetcher::from_env()?),
        Platform::Reddit => Box::new(RedditFetcher::new()?),
        other => return Err(FetchError::Config(format!("no live fetcher for {other}"))),
    })
}
