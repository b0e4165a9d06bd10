use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{FetchError, FetchOutcome, Media, MediaKind, PostContent, PostFetcher};
use crate::model::{Platform, PostKey};

/// File stem for a uid: `%` and `/` are percent-encoded so every uid maps
/// to a single file name.
pub fn fixture_file_name(post_uid: &str) -> String {
    post_uid.replace('%', "%25").replace('/', "%2F")
}

#[derive(Debug, Deserialize)]
struct FixturePost {
    platform: Platform,
    post_uid: String,
    #[serde(default)]
    text_content: String,
    #[serde(default)]
    media_refs: Vec<String>,
    #[serde(default)]
    author: String,
    #[serde(default)]
    posted_at: Option<DateTime<Utc>>,
    #[serde(default)]
    metrics: BTreeMap<String, u64>,
}

/// Serves posts from `<dir>/<uid>.json`. A `<uid>.deleted` marker, or no
/// file at all, means the post is gone.
#[derive(Debug, Clone)]
pub struct FixtureFetcher {
    dir: PathBuf,
}

impl FixtureFetcher {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl PostFetcher for FixtureFetcher {
    fn fetch(&self, key: &PostKey) -> Result<FetchOutcome, FetchError> {
        let stem = fixture_file_name(&key.post_uid);
        if self.dir.join(format!("{stem}.deleted")).exists() {
            return Ok(FetchOutcome::Deleted);
        }
        let path = self.dir.join(format!("{stem}.json"));
        let json = match std::fs::read_to_string(&path) {
            Ok(j) => j,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(FetchOutcome::Deleted),
            Err(e) => return Err(FetchError::Failed(format!("{}: {e}", path.display()))),
        };
        let post: FixturePost =
            serde_json::from_str(&json).map_err(|e| FetchError::Failed(format!("{}: {e}", path.display())))?;
        if post.platform != key.platform || post.post_uid != key.post_uid {
            return Err(FetchError::Failed(format!(
                "{} describes {}:{}",
                path.display(),
                post.platform,
                post.post_uid
            )));
        }
        Ok(FetchOutcome::Fetched(PostContent {
            text_content: post.text_content,
            media: post
                .media_refs
                .into_iter()
                .map(|r| Media {
                    kind: MediaKind::of_ref(&r),
                    reference: r,
                })
                .collect(),
            author: post.author,
            posted_at: post.posted_at,
            metrics: post.metrics,
        }))
    }
}

/// Stub for platforms with no access path.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnavailableFetcher;

impl PostFetcher for UnavailableFetcher {
    fn fetch(&self, _key: &PostKey) -> Result<FetchOutcome, FetchError> {
        Ok(FetchOutcome::Unavailable)
    }
}
