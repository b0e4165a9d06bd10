//! Post retrieval behind a uniform fetcher contract, with per-platform rate
//! limits, bounded retries and a concurrent `fetch_all` driver.

mod fixture;
mod limiter;
pub mod live;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::clock::Clock;
use crate::model::{FetchStatus, Modality, Platform, PostKey, SocialPost};
use crate::store::{Store, StoreError};

pub use fixture::{fixture_file_name, FixtureFetcher, UnavailableFetcher};
pub use limiter::RateLimiter;

/// Requests per second used for platforms served from fixtures.
pub const FIXTURE_RATE: f64 = 1000.0;
pub const MAX_RETRIES: u32 = 3;
pub const BACKOFF_BASE: Duration = Duration::from_secs(1);

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("no fetcher registered for {0}")]
    FetcherMissing(Platform),
    #[error("fetch failed: {0}")]
    Failed(String),
    #[error("invalid fetcher configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MediaKind {
    Image,
    Video,
}

const VIDEO_EXTENSIONS: [&str; 8] = ["mp4", "mov", "webm", "m4v", "avi", "mkv", "m3u8", "gifv"];

impl MediaKind {
    /// Guesses the kind of a media reference from its file extension;
    /// anything that is not a known video container counts as an image.
    pub fn of_ref(media_ref: &str) -> MediaKind {
        let path = media_ref.split(['?', '#']).next().unwrap_or_default();
        let ext = path
            .rsplit_once('.')
            .map(|(_, e)| e.to_ascii_lowercase())
            .unwrap_or_default();
        if VIDEO_EXTENSIONS.contains(&ext.as_str()) {
            MediaKind::Video
        } else {
            MediaKind::Image
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Media {
    pub kind: MediaKind,
    pub reference: String,
}

/// Content of a post that was retrieved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostContent {
    pub text_content: String,
    pub media: Vec<Media>,
    pub author: String,
    pub posted_at: Option<DateTime<Utc>>,
    pub metrics: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    Fetched(PostContent),
    Deleted,
    Unavailable,
}

pub trait PostFetcher: Send + Sync {
    fn fetch(&self, key: &PostKey) -> Result<FetchOutcome, FetchError>;
}

/// Video dominates; text with images is `text+image`; otherwise whichever
/// of text or image is present.
pub fn derive_modality(text: &str, media: &[Media]) -> Option<Modality> {
    let has_text = !text.trim().is_empty();
    if media.iter().any(|m| m.kind == MediaKind::Video) {
        Some(Modality::Video)
    } else if !media.is_empty() {
        Some(if has_text { Modality::TextImage } else { Modality::Image })
    } else if has_text {
        Some(Modality::Text)
    } else {
        None
    }
}

fn to_post(key: &PostKey, outcome: FetchOutcome, at: DateTime<Utc>) -> SocialPost {
    match outcome {
        FetchOutcome::Fetched(c) => {
            let Some(modality) = derive_modality(&c.text_content, &c.media) else {
                log::warn!("{key}: fetched post has neither text nor media");
                return SocialPost::missing(key, FetchStatus::Unavailable, at);
            };
            SocialPost {
                platform: key.platform,
                post_uid: key.post_uid.clone(),
                modality: Some(modality),
                text_content: c.text_content,
                media_refs: c.media.into_iter().map(|m| m.reference).collect(),
                author: c.author,
                posted_at: c.posted_at,
                metrics: c.metrics,
                fetch_status: FetchStatus::Fetched,
                fetched_at: at,
            }
        }
        FetchOutcome::Deleted => SocialPost::missing(key, FetchStatus::Deleted, at),
        FetchOutcome::Unavailable => SocialPost::missing(key, FetchStatus::Unavailable, at),
    }
}

struct Entry {
    fetcher: Arc<dyn PostFetcher>,
    limiter: RateLimiter,
}

/// Fetcher, rate limit and concurrency configuration per platform.
pub struct FetcherRegistry {
    entries: HashMap<Platform, Entry>,
    concurrency: usize,
}

impl FetcherRegistry {
    pub fn new(concurrency: usize) -> Result<Self, FetchError> {
        if concurrency == 0 {
            return Err(FetchError::Config("concurrency must be at least 1".into()));
        }
        Ok(Self {
            entries: HashMap::new(),
            concurrency,
        })
    }

    /// Fixture fetchers for every platform with a subdirectory under `dir`,
    /// the unavailable stub for the rest.
    pub fn fixtures(dir: &Path, concurrency: usize) -> Result<Self, FetchError> {
        if !dir.is_dir() {
            return Err(FetchError::Config(format!(
                "fixture directory {} not found",
                dir.display()
            )));
        }
        let mut registry = Self::new(concurrency)?;
        for platform in Platform::ALL {
            let sub = dir.join(platform.slug());
            if sub.is_dir() {
                registry.register(platform, Arc::new(FixtureFetcher::new(sub)), FIXTURE_RATE)?;
            } else {
                registry.register(platform, Arc::new(UnavailableFetcher), FIXTURE_RATE)?;
            }
        }
        Ok(registry)
    }

    /// Registers (or replaces) the fetcher for `platform`.
    pub fn register(&mut self, platform: Platform, fetcher: Arc<dyn PostFetcher>, rate: f64) -> Result<(), FetchError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(FetchError::Config(format!(
                "rate limit for {platform} must be positive"
            )));
        }
        self.entries.insert(
            platform,
            Entry {
                fetcher,
                limiter: RateLimiter::new(rate),
            },
        );
        Ok(())
    }

    pub fn concurrency(&self) -> usize {
        self.concurrency
    }

    pub fn has(&self, platform: Platform) -> bool {
        self.entries.contains_key(&platform)
    }
}

/// Fetches one post, retrying rate-limit responses with exponential
/// backoff. Exhausted retries and other failures yield `unavailable`.
pub fn fetch_post(registry: &FetcherRegistry, key: &PostKey, clock: &dyn Clock) -> Result<SocialPost, FetchError> {
    let entry = registry
        .entries
        .get(&key.platform)
        .ok_or(FetchError::FetcherMissing(key.platform))?;
    let mut attempt = 0;
    let outcome = loop {
        entry.limiter.acquire(clock);
        match entry.fetcher.fetch(key) {
            Ok(outcome) => break outcome,
            Err(FetchError::RateLimited { retry_after }) if attempt < MAX_RETRIES => {
                let backoff = BACKOFF_BASE * 2u32.pow(attempt);
                let wait = retry_after.map_or(backoff, |r| r.max(backoff));
                log::debug!("{key}: rate limited, retrying in {wait:?}");
                clock.sleep(wait);
                attempt += 1;
            }
            Err(e) => {
                log::warn!("{key}: {e}; marking unavailable");
                break FetchOutcome::Unavailable;
            }
        }
    };
    Ok(to_post(key, outcome, clock.now()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FetchReport {
    pub fetched: usize,
    pub deleted: usize,
    pub unavailable: usize,
    /// Posts already stored and left alone.
    pub skipped: usize,
}

/// Fetches every distinct `(platform, post_uid)` among the stored links
/// once, persisting each outcome as it arrives.
pub fn fetch_all(
    store: &mut Store,
    registry: &FetcherRegistry,
    clock: &dyn Clock,
    refresh: bool,
) -> Result<FetchReport, FetchError> {
    let unique: BTreeSet<PostKey> = store
        .links()
        .map(|l| PostKey::new(l.platform, l.post_uid.clone()))
        .collect();
    if let Some(p) = unique.iter().map(|k| k.platform).find(|p| !registry.has(*p)) {
        return Err(FetchError::FetcherMissing(p));
    }
    let mut report = FetchReport::default();
    let jobs: Vec<PostKey> = unique
        .into_iter()
        .filter(|k| {
            let skip = !refresh && store.post(k).is_some();
            report.skipped += usize::from(skip);
            !skip
        })
        .collect();

    let next = AtomicUsize::new(0);
    let workers = registry.concurrency.min(jobs.len());
    let (tx, rx) = mpsc::channel::<Result<SocialPost, FetchError>>();
    std::thread::scope(|s| -> Result<(), FetchError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(key) = jobs.get(i) else { break };
                if tx.send(fetch_post(registry, key, clock)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for post in rx {
            let post = post?;
            match post.fetch_status {
                FetchStatus::Fetched => report.fetched += 1,
                FetchStatus::Deleted => report.deleted += 1,
                FetchStatus::Unavailable => report.unavailable += 1,
            }
            store.upsert(post)?;
        }
        Ok(())
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{FixedClock, ManualClock};
    use crate::model::SocialLink;
    use chrono::TimeZone;
    use proptest::prelude::*;
    use std::sync::Mutex;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 5, 1, 12, 0, 0).unwrap()
    }

    fn media(r: &str) -> Media {
        Media {
            kind: MediaKind::of_ref(r),
            reference: r.into(),
        }
    }

    #[test]
    fn modality_rules() {
        assert_eq!(derive_modality("hi", &[]), Some(Modality::Text));
        assert_eq!(derive_modality("", &[media("a.jpg")]), Some(Modality::Image));
        assert_eq!(derive_modality("hi", &[media("a.png")]), Some(Modality::TextImage));
        assert_eq!(derive_modality("", &[media("a.mp4")]), Some(Modality::Video));
        assert_eq!(
            derive_modality("hi", &[media("a.jpg"), media("b.MP4?x=1")]),
            Some(Modality::Video)
        );
        assert_eq!(derive_modality("  ", &[]), None);
    }

    /// Counts calls per key and answers from a fixed script.
    #[derive(Default)]
    struct Scripted {
        calls: Mutex<HashMap<PostKey, usize>>,
        call_times: Mutex<Vec<DateTime<Utc>>>,
        rate_limited_first: usize,
        clock: Option<Arc<ManualClock>>,
    }

    impl PostFetcher for Scripted {
        fn fetch(&self, key: &PostKey) -> Result<FetchOutcome, FetchError> {
            if let Some(c) = &self.clock {
                self.call_times.lock().unwrap().push(c.now());
            }
            let n = {
                let mut calls = self.calls.lock().unwrap();
                let n = calls.entry(key.clone()).or_default();
                *n += 1;
                *n
            };
            if n <= self.rate_limited_first {
                return Err(FetchError::RateLimited { retry_after: None });
            }
            Ok(FetchOutcome::Fetched(PostContent {
                text_content: format!("post {}", key.post_uid),
                ..Default::default()
            }))
        }
    }

    fn store_with_links(dir: &Path, uids: &[&str]) -> Store {
        let mut store = Store::open(dir).unwrap();
        store.upsert(crate::store::tests::article("PY1")).unwrap();
        for (i, uid) in uids.iter().enumerate() {
            let url = format!("https://twitter.com/u/status/{uid}");
            store
                .upsert(SocialLink {
                    article_id: "PY1".into(),
                    platform: Platform::Twitter,
                    raw_url: url.clone(),
                    canonical_url: url,
                    post_uid: uid.to_string(),
                    anchor_index: i,
                })
                .unwrap();
        }
        store
    }

    #[test]
    fn retries_rate_limits_with_backoff() {
        let clock = ManualClock::new(t0());
        let fetcher = Arc::new(Scripted {
            rate_limited_first: 3,
            ..Default::default()
        });
        let mut reg = FetcherRegistry::new(1).unwrap();
        reg.register(Platform::Twitter, fetcher.clone(), 1000.0).unwrap();
        let post = fetch_post(&reg, &PostKey::new(Platform::Twitter, "1"), &clock).unwrap();
        assert_eq!(post.fetch_status, FetchStatus::Fetched);
        // 1 + 2 + 4 seconds of backoff, plus limiter spacing between the four attempts.
        let waited = clock.now() - t0();
        assert!(waited >= chrono::Duration::seconds(7) && waited < chrono::Duration::seconds(8));
    }

    #[test]
    fn exhausted_retries_mark_unavailable() {
        let fetcher = Arc::new(Scripted {
            rate_limited_first: 10,
            ..Default::default()
        });
        let mut reg = FetcherRegistry::new(1).unwrap();
        reg.register(Platform::Twitter, fetcher.clone(), 1000.0).unwrap();
        let key = PostKey::new(Platform::Twitter, "1");
        let post = fetch_post(&reg, &key, &FixedClock(t0())).unwrap();
        assert_eq!(post.fetch_status, FetchStatus::Unavailable);
        assert_eq!(fetcher.calls.lock().unwrap()[&key], 4);
    }

    #[test]
    fn missing_fetcher() {
        let reg = FetcherRegistry::new(1).unwrap();
        let err = fetch_post(&reg, &PostKey::new(Platform::Gab, "1"), &FixedClock(t0())).unwrap_err();
        assert!(matches!(err, FetchError::FetcherMissing(Platform::Gab)));
        let mut reg = FetcherRegistry::new(1).unwrap();
        assert!(reg.register(Platform::Gab, Arc::new(UnavailableFetcher), 0.0).is_err());
        assert!(FetcherRegistry::new(0).is_err());
    }

    #[test]
    fn observed_rate_respects_limit() {
        let clock = Arc::new(ManualClock::new(t0()));
        let fetcher = Arc::new(Scripted {
            clock: Some(clock.clone()),
            ..Default::default()
        });
        let mut reg = FetcherRegistry::new(1).unwrap();
        reg.register(Platform::Twitter, fetcher.clone(), 5.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let uids: Vec<String> = (0..20).map(|i| i.to_string()).collect();
        let uid_refs: Vec<&str> = uids.iter().map(String::as_str).collect();
        let mut store = store_with_links(dir.path(), &uid_refs);
        fetch_all(&mut store, &reg, clock.as_ref(), false).unwrap();
        let times = fetcher.call_times.lock().unwrap();
        assert_eq!(times.len(), 20);
        for w in times.windows(2) {
            assert!(w[1] - w[0] >= chrono::Duration::milliseconds(200));
        }
    }

    #[test]
    fn real_clock_rate_with_workers() {
        let fetcher = Arc::new(Scripted::default());
        let mut reg = FetcherRegistry::new(4).unwrap();
        reg.register(Platform::Twitter, fetcher, 50.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let uids: Vec<String> = (0..11).map(|i| i.to_string()).collect();
        let uid_refs: Vec<&str> = uids.iter().map(String::as_str).collect();
        let mut store = store_with_links(dir.path(), &uid_refs);
        let start = std::time::Instant::now();
        fetch_all(&mut store, &reg, &crate::clock::SystemClock, false).unwrap();
        // Eleven requests at 50/s need at least ten 20 ms gaps.
        assert!(start.elapsed() >= Duration::from_millis(200));
    }

    #[test]
    fn rerun_fetches_nothing_new() {
        let fetcher = Arc::new(Scripted::default());
        let mut reg = FetcherRegistry::new(2).unwrap();
        reg.register(Platform::Twitter, fetcher.clone(), 1000.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut store = store_with_links(dir.path(), &["1", "2", "3"]);
        let first = fetch_all(&mut store, &reg, &FixedClock(t0()), false).unwrap();
        assert_eq!((first.fetched, first.deleted, first.unavailable), (3, 0, 0));
        let again = fetch_all(&mut store, &reg, &FixedClock(t0()), false).unwrap();
        assert_eq!(
            (again.fetched, again.deleted, again.unavailable, again.skipped),
            (0, 0, 0, 3)
        );
        let refreshed = fetch_all(&mut store, &reg, &FixedClock(t0()), true).unwrap();
        assert_eq!(refreshed.fetched, 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn each_unique_uid_fetched_once(
            uids in proptest::collection::vec(0u8..30, 1..60),
            workers in 1usize..6,
        ) {
            let fetcher = Arc::new(Scripted::default());
            let mut reg = FetcherRegistry::new(workers).unwrap();
            reg.register(Platform::Twitter, fetcher.clone(), 1000.0).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let names: Vec<String> = uids.iter().map(|u| u.to_string()).collect();
            let mut store = Store::open(dir.path()).unwrap();
            for id in 1..=3 {
                store.upsert(crate::store::tests::article(&format!("PY{id}"))).unwrap();
            }
            // Spread the uids over three articles so the same uid can recur.
            for (i, uid) in names.iter().enumerate() {
                let url = format!("https://twitter.com/u/status/{uid}");
                store.upsert(SocialLink {
                    article_id: format!("PY{}", i % 3 + 1),
                    platform: Platform::Twitter,
                    raw_url: url.clone(),
                    canonical_url: url,
                    post_uid: uid.clone(),
                    anchor_index: i,
                }).unwrap();
            }
            let distinct: BTreeSet<&String> = names.iter().collect();
            let report = fetch_all(&mut store, &reg, &FixedClock(t0()), false).unwrap();
            prop_assert_eq!(report.fetched, distinct.len());
            let calls = fetcher.calls.lock().unwrap();
            prop_assert_eq!(calls.len(), distinct.len());
            prop_assert!(calls.values().all(|&n| n == 1));
        }
    }
}
