//! Summary views over a labeled store and the JSON Lines export. Every view
//! leaves out rejected posts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::labeling::dedupe_order;
use crate::model::{
    Enrichment, FetchStatus, LabelClass, LabeledPost, Modality, Platform, PostKey, SocialPost, VerificationState,
};
use crate::store::Store;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    WritePermission {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Posts some review rejected.
fn rejected_posts(store: &Store) -> HashSet<PostKey> {
    store
        .labeled_posts()
        .filter(|l| l.verification_state == VerificationState::Rejected)
        .map(LabeledPost::post_key)
        .collect()
}

/// One fetched, non-rejected post with the labeled record that represents
/// it (the dedupe winner if duplicates remain).
#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry<'a> {
    pub labeled: &'a LabeledPost,
    pub post: &'a SocialPost,
}

pub fn corpus(store: &Store) -> Vec<CorpusEntry<'_>> {
    let rejected = rejected_posts(store);
    let mut best: BTreeMap<PostKey, &LabeledPost> = BTreeMap::new();
    for l in store.labeled_posts() {
        let key = l.post_key();
        if rejected.contains(&key) {
            continue;
        }
        best.entry(key)
            .and_modify(|cur| {
                if dedupe_order(l, cur).is_lt() {
                    *cur = l;
                }
            })
            .or_insert(l);
    }
    best.into_iter()
        .filter_map(|(key, labeled)| {
            let post = store.post(&key)?;
            (post.fetch_status == FetchStatus::Fetched).then_some(CorpusEntry { labeled, post })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformRow {
    pub platform: Platform,
    pub total_links: usize,
    pub unique_posts: usize,
    pub text: usize,
    pub image: usize,
    #[serde(rename = "text+image")]
    pub text_image: usize,
    pub video: usize,
}

/// Links, distinct posts and the modality split of fetched posts, per
/// platform with any links.
pub fn platform_summary(store: &Store) -> Vec<PlatformRow> {
    let rejected = rejected_posts(store);
    let mut rows: BTreeMap<Platform, PlatformRow> = BTreeMap::new();
    let mut seen = HashSet::new();
    for link in store.links() {
        let key = PostKey::new(link.platform, link.post_uid.clone());
        if rejected.contains(&key) {
            continue;
        }
        let row = rows.entry(link.platform).or_insert_with(|| PlatformRow {
            platform: link.platform,
            total_links: 0,
            unique_posts: 0,
            text: 0,
            image: 0,
            text_image: 0,
            video: 0,
        });
        row.total_links += 1;
        if seen.insert(key) {
            row.unique_posts += 1;
        }
    }
    for e in corpus(store) {
        let Some(row) = rows.get_mut(&e.post.platform) else {
            continue;
        };
        match e.post.modality {
            Some(Modality::Text) => row.text += 1,
            Some(Modality::Image) => row.image += 1,
            Some(Modality::TextImage) => row.text_image += 1,
            Some(Modality::Video) => row.video += 1,
            None => {}
        }
    }
    rows.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRow {
    pub platform: Platform,
    #[serde(rename = "false")]
    pub false_: usize,
    pub partially_false: usize,
    pub other: usize,
    #[serde(rename = "true")]
    pub true_: usize,
}

impl ClassRow {
    pub fn total(&self) -> usize {
        self.false_ + self.partially_false + self.other + self.true_
    }
}

/// Normalized class counts over unique, fetched, non-rejected posts, for
/// the same platforms as `platform_summary`.
pub fn class_distribution(store: &Store) -> Vec<ClassRow> {
    let mut rows: BTreeMap<Platform, ClassRow> = platform_summary(store)
        .into_iter()
        .map(|r| {
            (
                r.platform,
                ClassRow {
                    platform: r.platform,
                    false_: 0,
                    partially_false: 0,
                    other: 0,
                    true_: 0,
                },
            )
        })
        .collect();
    for e in corpus(store) {
        let Some(row) = rows.get_mut(&e.labeled.platform) else {
            continue;
        };
        match e.labeled.label_norm {
            LabelClass::False => row.false_ += 1,
            LabelClass::PartiallyFalse => row.partially_false += 1,
            LabelClass::Other => row.other += 1,
            LabelClass::True => row.true_ += 1,
        }
    }
    rows.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub platform: Platform,
    /// `YYYY-MM`.
    pub month: String,
    pub count: usize,
    /// How many of `count` were dated by the post itself.
    pub from_posted_at: usize,
    /// How many fell back to the citing article's date.
    pub from_article_date: usize,
}

pub const DEFAULT_MIN_POSTS: usize = 25;

/// Monthly post counts per platform over distinct, non-rejected linked
/// posts. A post is dated by `posted_at`, else by its earliest citing
/// article. Platforms with `min_posts` or fewer dated posts are left out.
pub fn timeline(store: &Store, min_posts: usize) -> Vec<TimelineRow> {
    let rejected = rejected_posts(store);
    let mut article_date: HashMap<PostKey, Option<NaiveDate>> = HashMap::new();
    for link in store.links() {
        let key = PostKey::new(link.platform, link.post_uid.clone());
        if rejected.contains(&key) {
            continue;
        }
        let date = store.article(&link.article_id).and_then(|a| a.published_date);
        let slot = article_date.entry(key).or_insert(date);
        // Earliest dated article wins; undated only if nothing else is.
        *slot = match (*slot, date) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
    let mut buckets: BTreeMap<Platform, BTreeMap<String, (usize, usize)>> = BTreeMap::new();
    for (key, fallback) in article_date {
        let posted = store.post(&key).and_then(|p| p.posted_at).map(|t| t.date_naive());
        let (date, own) = match (posted, fallback) {
            (Some(d), _) => (d, true),
            (None, Some(d)) => (d, false),
            (None, None) => continue,
        };
        let cell = buckets
            .entry(key.platform)
            .or_default()
            .entry(date.format("%Y-%m").to_string())
            .or_default();
        if own {
            cell.0 += 1;
        } else {
            cell.1 += 1;
        }
    }
    buckets
        .into_iter()
        .filter(|(_, months)| months.values().map(|(a, b)| a + b).sum::<usize>() > min_posts)
        .flat_map(|(platform, months)| {
            months.into_iter().map(move |(month, (own, fallback))| TimelineRow {
                platform,
                month,
                count: own + fallback,
                from_posted_at: own,
                from_article_date: fallback,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub articles: usize,
    pub articles_with_links: usize,
    pub coverage: f64,
}

/// Share of articles with at least one stored social link.
pub fn link_coverage(store: &Store) -> Coverage {
    let with_links: HashSet<&str> = store.links().map(|l| l.article_id.as_str()).collect();
    let articles = store.articles().count();
    let articles_with_links = store
        .articles()
        .filter(|a| with_links.contains(a.news_id.as_str()))
        .count();
    Coverage {
        articles,
        articles_with_links,
        coverage: if articles == 0 {
            0.0
        } else {
            articles_with_links as f64 / articles as f64
        },
    }
}

/// One exported line: the labeled record, its enrichment and the post
/// content, flattened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub platform: Platform,
    pub post_uid: String,
    pub news_id: String,
    pub label_raw: String,
    pub label_norm: LabelClass,
    pub verification_state: VerificationState,
    pub title: String,
    pub publisher: String,
    pub published_date: Option<NaiveDate>,
    pub language: Option<String>,
    pub countries: Vec<String>,
    pub source_url: String,
    pub modality: Option<Modality>,
    pub text_content: String,
    pub media_refs: Vec<String>,
    pub author: String,
    pub posted_at: Option<DateTime<Utc>>,
    pub metrics: BTreeMap<String, u64>,
    pub fetched_at: DateTime<Utc>,
}

impl ExportRecord {
    pub fn new(labeled: &LabeledPost, post: &SocialPost) -> Self {
        let e = &labeled.enrichment;
        Self {
            platform: labeled.platform,
            post_uid: labeled.post_uid.clone(),
            news_id: labeled.news_id.clone(),
            label_raw: labeled.label_raw.clone(),
            label_norm: labeled.label_norm,
            verification_state: labeled.verification_state,
            title: e.title.clone(),
            publisher: e.publisher.clone(),
            published_date: e.published_date,
            language: e.language.clone(),
            countries: e.countries.clone(),
            source_url: e.source_url.clone(),
            modality: post.modality,
            text_content: post.text_content.clone(),
            media_refs: post.media_refs.clone(),
            author: post.author.clone(),
            posted_at: post.posted_at,
            metrics: post.metrics.clone(),
            fetched_at: post.fetched_at,
        }
    }

    pub fn to_labeled(&self) -> LabeledPost {
        LabeledPost {
            platform: self.platform,
            post_uid: self.post_uid.clone(),
            news_id: self.news_id.clone(),
            label_raw: self.label_raw.clone(),
            label_norm: self.label_norm,
            verification_state: self.verification_state,
            enrichment: Enrichment {
                title: self.title.clone(),
                publisher: self.publisher.clone(),
                published_date: self.published_date,
                language: self.language.clone(),
                countries: self.countries.clone(),
                source_url: self.source_url.clone(),
            },
        }
    }
}

/// Records `export_jsonl` would write, in post-key order.
pub fn export_records(store: &Store, confirmed_only: bool) -> Vec<ExportRecord> {
    corpus(store)
        .into_iter()
        .filter(|e| !confirmed_only || e.labeled.verification_state == VerificationState::Confirmed)
        .map(|e| ExportRecord::new(e.labeled, e.post))
        .collect()
}

/// Writes one JSON object per line and returns the line count. The file is
/// replaced atomically.
pub fn export_jsonl(store: &Store, out: &Path, confirmed_only: bool) -> Result<usize, ReportError> {
    let records = export_records(store, confirmed_only);
    let fail = |source| ReportError::WritePermission {
        path: out.display().to_string(),
        source,
    };
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        for r in &records {
            serde_json::to_writer(&mut w, r).expect("export records serialize");
            w.write_all(b"\n").map_err(fail)?;
        }
        w.flush().map_err(fail)?;
    }
    tmp.persist(out).map_err(|e| fail(e.error))?;
    Ok(records.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (table, csv, json)")),
        }
    }
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Left-aligned columns separated by two spaces, with a rule under the
/// header.
fn to_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header);
    line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for r in rows {
        line(r);
    }
    out
}

/// Renders flat report rows. An empty table renders as nothing for CSV and
/// table formats and as `[]` for JSON.
pub fn render<T: Serialize>(rows: &[T], format: Format) -> Result<String, ReportError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(rows).expect("rows serialize") + "\n"),
        Format::Csv => to_csv(rows),
        Format::Table => {
            let csv_text = to_csv(rows)?;
            let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
            if rows.is_empty() {
                return Ok(String::new());
            }
            let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
            let body = reader
                .records()
                .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
                .collect::<Result<Vec<Vec<String>>, _>>()?;
            Ok(to_table(&header, &body))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NewsArticle, SocialLink};
    use crate::store::tests::article;
    use chrono::TimeZone;

    fn at(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap()
    }

    struct Builder {
        store: Store,
        _dir: tempfile::TempDir,
    }

    impl Builder {
        fn new() -> Self {
            let dir = tempfile::tempdir().unwrap();
            Self {
                store: Store::open(dir.path()).unwrap(),
                _dir: dir,
            }
        }

        fn article(&mut self, id: &str, date: Option<NaiveDate>, verdict: &str) -> NewsArticle {
            let mut a = article(id);
            a.published_date = date;
            a.verdict_raw = verdict.into();
            self.store.upsert(a.clone()).unwrap();
            a
        }

        #[allow(clippy::too_many_arguments)]
        fn post(
            &mut self,
            a: &NewsArticle,
            platform: Platform,
            uid: &str,
            status: FetchStatus,
            modality: Option<Modality>,
            posted_at: Option<DateTime<Utc>>,
            class: LabelClass,
        ) {
            let url = format!("https://example.com/{uid}");
            self.store
                .upsert(SocialLink {
                    article_id: a.news_id.clone(),
                    platform,
                    raw_url: url.clone(),
                    canonical_url: url,
                    post_uid: uid.into(),
                    anchor_index: 0,
                })
                .unwrap();
            let key = PostKey::new(platform, uid);
            if self.store.post(&key).is_none() {
                let mut p = SocialPost::missing(&key, status, at(2021, 1, 1));
                if status == FetchStatus::Fetched {
                    p.text_content = "t".into();
                    p.modality = modality;
                    p.posted_at = posted_at;
                }
                self.store.upsert(p).unwrap();
            }
            if status == FetchStatus::Fetched {
                self.store
                    .upsert(LabeledPost {
                        platform,
                        post_uid: uid.into(),
                        news_id: a.news_id.clone(),
                        label_raw: a.verdict_raw.clone(),
                        label_norm: class,
                        verification_state: VerificationState::Unverified,
                        enrichment: Enrichment::from_article(a),
                    })
                    .unwrap();
            }
        }

        fn set_state(&mut self, platform: Platform, uid: &str, state: VerificationState) {
            let mut l = self
                .store
                .labeled_posts()
                .find(|l| l.platform == platform && l.post_uid == uid)
                .unwrap()
                .clone();
            l.verification_state = VerificationState::Sampled;
            self.store.upsert(l.clone()).unwrap();
            l.verification_state = state;
            self.store.upsert(l).unwrap();
        }
    }

    fn fixture() -> Builder {
        let mut b = Builder::new();
        let a1 = b.article("PY1", NaiveDate::from_ymd_opt(2020, 3, 10), "False");
        let a2 = b.article("PY2", NaiveDate::from_ymd_opt(2020, 4, 2), "Misleading");
        let _a3 = b.article("PY3", None, "True");
        use FetchStatus::*;
        use Modality::*;
        b.post(
            &a1,
            Platform::Twitter,
            "1",
            Fetched,
            Some(Text),
            Some(at(2020, 3, 1)),
            LabelClass::False,
        );
        b.post(
            &a1,
            Platform::Twitter,
            "2",
            Fetched,
            Some(TextImage),
            None,
            LabelClass::False,
        );
        b.post(
            &a2,
            Platform::Twitter,
            "2",
            Fetched,
            Some(TextImage),
            None,
            LabelClass::PartiallyFalse,
        );
        b.post(&a2, Platform::Twitter, "3", Deleted, None, None, LabelClass::False);
        b.post(
            &a2,
            Platform::YouTube,
            "v",
            Fetched,
            Some(Video),
            Some(at(2020, 2, 20)),
            LabelClass::PartiallyFalse,
        );
        b
    }

    #[test]
    fn summary_counts() {
        let b = fixture();
        let rows = platform_summary(&b.store);
        assert_eq!(rows.len(), 2);
        let tw = &rows[0];
        assert_eq!(tw.platform, Platform::Twitter);
        assert_eq!((tw.total_links, tw.unique_posts), (4, 3));
        assert_eq!((tw.text, tw.image, tw.text_image, tw.video), (1, 0, 1, 0));
        assert_eq!(rows[1].video, 1);
        let classes = class_distribution(&b.store);
        // Post 2 is counted once, under its earliest citing article.
        assert_eq!((classes[0].false_, classes[0].partially_false), (2, 0));
        for (s, c) in rows.iter().zip(&classes) {
            assert_eq!(s.text + s.image + s.text_image + s.video, c.total());
        }
    }

    #[test]
    fn empty_store_reports() {
        let b = Builder::new();
        assert!(platform_summary(&b.store).is_empty());
        assert!(class_distribution(&b.store).is_empty());
        assert!(timeline(&b.store, 0).is_empty());
        assert_eq!(link_coverage(&b.store).coverage, 0.0);
        assert_eq!(render::<PlatformRow>(&[], Format::Json).unwrap(), "[]\n");
    }

    #[test]
    fn coverage_fraction() {
        let b = fixture();
        let c = link_coverage(&b.store);
        assert_eq!((c.articles, c.articles_with_links), (3, 2));
        assert!((c.coverage - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn timeline_dates_and_filter() {
        let b = fixture();
        let rows = timeline(&b.store, 0);
        let tw: Vec<_> = rows.iter().filter(|r| r.platform == Platform::Twitter).collect();
        // Post 1 by its own date; posts 2 and 3 by their earliest article.
        assert_eq!(tw.len(), 2);
        assert_eq!(
            (tw[0].month.as_str(), tw[0].from_posted_at, tw[0].from_article_date),
            ("2020-03", 1, 1)
        );
        assert_eq!(
            (tw[1].month.as_str(), tw[1].count, tw[1].from_article_date),
            ("2020-04", 1, 1)
        );
        let filtered = timeline(&b.store, 1);
        assert!(filtered.iter().all(|r| r.platform == Platform::Twitter));
    }

    #[test]
    fn rejected_posts_vanish_everywhere() {
        let mut b = fixture();
        b.set_state(Platform::YouTube, "v", VerificationState::Rejected);
        assert!(platform_summary(&b.store)
            .iter()
            .all(|r| r.platform != Platform::YouTube));
        assert!(class_distribution(&b.store)
            .iter()
            .all(|r| r.platform != Platform::YouTube));
        assert!(timeline(&b.store, 0).iter().all(|r| r.platform != Platform::YouTube));
        assert!(export_records(&b.store, false)
            .iter()
            .all(|r| r.platform != Platform::YouTube));
    }

    #[test]
    fn export_lines_and_round_trip() {
        let mut b = fixture();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out.jsonl");
        assert_eq!(export_jsonl(&b.store, &out, false).unwrap(), 3);
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        for line in text.lines() {
            let r: ExportRecord = serde_json::from_str(line).unwrap();
            let stored = b
                .store
                .labeled_post(&crate::model::LabeledKey {
                    post: PostKey::new(r.platform, r.post_uid.clone()),
                    news_id: r.news_id.clone(),
                })
                .unwrap();
            assert_eq!(&r.to_labeled(), stored);
        }
        let first = text.lines().next().unwrap();
        assert!(first.starts_with(r#"{"platform":"twitter","post_uid":"1","news_id":"PY1","label_raw""#));

        b.set_state(Platform::Twitter, "1", VerificationState::Confirmed);
        b.set_state(Platform::YouTube, "v", VerificationState::Confirmed);
        assert_eq!(export_jsonl(&b.store, &out, true).unwrap(), 2);
        let missing = dir.path().join("no/such/dir/out.jsonl");
        assert!(matches!(
            export_jsonl(&b.store, &missing, false),
            Err(ReportError::WritePermission { .. })
        ));
    }

    #[test]
    fn reports_do_not_touch_the_store() {
        let b = fixture();
        let root = b.store.root().to_path_buf();
        let snapshot = |root: &Path| {
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(root)
                .unwrap()
                .filter_map(|e| e.ok())
                .filter(|e| e.path().is_file())
                .map(|e| {
                    (
                        e.file_name().to_string_lossy().into_owned(),
                        std::fs::read(e.path()).unwrap(),
                    )
                })
                .collect();
            files.sort();
            files
        };
        let before = snapshot(&root);
        let _ = (
            platform_summary(&b.store),
            class_distribution(&b.store),
            timeline(&b.store, 0),
        );
        let _ = (link_coverage(&b.store), export_records(&b.store, false));
        assert_eq!(snapshot(&root), before);
    }

    #[test]
    fn rendering() {
        let rows = platform_summary(&fixture().store);
        let csv = render(&rows, Format::Csv).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "platform,total_links,unique_posts,text,image,text+image,video"
        );
        assert_eq!(csv.lines().nth(1).unwrap(), "twitter,4,3,1,0,1,0");
        let table = render(&rows, Format::Table).unwrap();
        assert!(table.lines().nth(2).unwrap().starts_with("twitter   4            3"));
        let classes = render(&class_distribution(&fixture().store), Format::Csv).unwrap();
        assert_eq!(
            classes.lines().next().unwrap(),
            "platform,false,partially_false,other,true"
        );
    }
}
