//! Social-media link extraction: anchors out of article HTML, platform
//! classification, URL canonicalization and post-id extraction.

mod patterns;

use std::collections::HashSet;
use std::path::PathBuf;

use scraper::{ElementRef, Html, Selector};
use url::Url;

use crate::model::{NewsArticle, Platform, PostKey, SocialLink};
use crate::store::{Store, StoreError};

pub use patterns::{builtin_patterns, PathRule, PatternTable, PlatformPattern, UidLocator};

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("unparseable URL {0:?}")]
    UrlUnparseable(String),
    #[error("{platform} URL {url} has no extractable post id")]
    NoPostId { platform: Platform, url: String },
    #[error("cannot read article HTML {path}: {source}")]
    HtmlUnreadable { path: PathBuf, source: std::io::Error },
    #[error("invalid pattern table: {0}")]
    PatternsInvalid(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Query parameters that only track referrals and never identify content.
const TRACKING_PARAMS: [&str; 5] = ["s", "t", "ref_src", "igshid", "fbclid"];

fn is_tracking_param(key: &str) -> bool {
    let key = key.to_ascii_lowercase();
    key.starts_with("utm_") || TRACKING_PARAMS.contains(&key.as_str())
}

fn parse(url: &str) -> Result<Url, LinkError> {
    Url::parse(url.trim()).map_err(|_| LinkError::UrlUnparseable(url.to_string()))
}

impl PatternTable {
    pub fn classify_platform(&self, url: &str) -> Result<Platform, LinkError> {
        Ok(self.classify_url(&parse(url)?))
    }

    pub fn extract_post_uid(&self, platform: Platform, url: &str) -> Result<String, LinkError> {
        let parsed = parse(url)?;
        self.locate_uid(platform, &parsed).ok_or_else(|| LinkError::NoPostId {
            platform,
            url: url.to_string(),
        })
    }

    /// Normalizes a URL: lowercase scheme and host, https for platform
    /// hosts, no fragment, no tracking parameters, no trailing slash except
    /// on the root path. Path case is preserved.
    pub fn canonicalize(&self, url: &str) -> Result<String, LinkError> {
        let mut parsed = parse(url)?;
        let platform_host = parsed.host_str().is_some_and(|h| self.is_platform_host(h));
        if platform_host && parsed.scheme() == "http" {
            parsed
                .set_scheme("https")
                .map_err(|_| LinkError::UrlUnparseable(url.to_string()))?;
        }
        parsed.set_fragment(None);
        if let Some(query) = parsed.query() {
            let kept: Vec<&str> = query
                .split('&')
                .filter(|pair| !pair.is_empty())
                .filter(|pair| {
                    let key = pair.split('=').next().unwrap_or("");
                    let key = percent_decode(key);
                    !is_tracking_param(&key)
                })
                .collect();
            let kept = kept.join("&");
            parsed.set_query((!kept.is_empty()).then_some(kept.as_str()));
        }
        if !parsed.cannot_be_a_base() {
            let path = parsed.path();
            if path.len() > 1 && path.ends_with('/') {
                let trimmed = path.trim_end_matches('/');
                let trimmed = if trimmed.is_empty() { "/" } else { trimmed }.to_string();
                parsed.set_path(&trimmed);
            }
        }
        Ok(parsed.into())
    }

    /// Classifies, canonicalizes and extracts the post id in one step.
    /// `Ok(None)` means the URL does not point at a social-media post.
    pub fn resolve(&self, url: &str) -> Result<Option<ResolvedLink>, LinkError> {
        let platform = self.classify_platform(url)?;
        if platform == Platform::Other {
            return Ok(None);
        }
        let canonical_url = self.canonicalize(url)?;
        let post_uid = self.extract_post_uid(platform, &canonical_url)?;
        Ok(Some(ResolvedLink {
            platform,
            canonical_url,
            post_uid,
        }))
    }
}

fn percent_decode(s: &str) -> String {
    url::form_urlencoded::parse(s.as_bytes())
        .next()
        .map(|(k, _)| k.into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedLink {
    pub platform: Platform,
    pub canonical_url: String,
    pub post_uid: String,
}

fn default_table() -> &'static PatternTable {
    static TABLE: std::sync::OnceLock<PatternTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(PatternTable::default)
}

/// Classifies `url` with the built-in pattern table.
pub fn classify_platform(url: &str) -> Result<Platform, LinkError> {
    default_table().classify_platform(url)
}

/// Extracts the post id with the built-in pattern table.
pub fn extract_post_uid(platform: Platform, url: &str) -> Result<String, LinkError> {
    default_table().extract_post_uid(platform, url)
}

/// Canonicalizes with the built-in pattern table.
pub fn canonicalize(url: &str) -> Result<String, LinkError> {
    default_table().canonicalize(url)
}

/// `href` values of every anchor inside the article region, in document
/// order, resolved against `base`. With no scope (or a scope that matches
/// nothing) the whole document is searched. Hrefs that cannot be resolved
/// are returned verbatim so positions stay aligned with the document.
pub fn extract_anchors(html: &str, scope: Option<&str>, base: &Url) -> Vec<String> {
    let doc = Html::parse_document(html);
    let anchor_sel = Selector::parse("a[href]").expect("static selector");
    let scope_sel = scope.and_then(|s| match Selector::parse(s) {
        Ok(sel) => Some(sel),
        Err(e) => {
            log::warn!("ignoring invalid article scope {s:?}: {e}");
            None
        }
    });

    let roots: Vec<ElementRef> = match &scope_sel {
        Some(sel) => doc.select(sel).collect(),
        None => vec![doc.root_element()],
    };
    let roots = if roots.is_empty() {
        vec![doc.root_element()]
    } else {
        roots
    };

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for root in roots {
        for a in root.select(&anchor_sel) {
            if !seen.insert(a.id()) {
                continue;
            }
            let href = a.value().attr("href").unwrap_or("").trim();
            match base.join(href) {
                Ok(u) => out.push(u.to_string()),
                Err(_) => out.push(href.to_string()),
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct ExtractReport {
    pub articles: usize,
    pub anchors: usize,
    pub links: usize,
    pub dropped: usize,
    pub failures: Vec<(String, String)>,
}

/// Runs the anchor -> platform -> canonical URL -> post id chain over one
/// stored article and persists a link for every anchor that resolves to a
/// post. Repeated citations of one post within an article keep the first
/// anchor position.
pub fn extract_links(
    article: &NewsArticle,
    store: &mut Store,
    table: &PatternTable,
) -> Result<Vec<SocialLink>, LinkError> {
    let (links, _) = links_for_article(article, store, table)?;
    for link in &links {
        store.upsert(link.clone())?;
    }
    Ok(links)
}

fn links_for_article(
    article: &NewsArticle,
    store: &Store,
    table: &PatternTable,
) -> Result<(Vec<SocialLink>, usize), LinkError> {
    let path = store.html_path(&article.html_ref);
    let html = std::fs::read_to_string(&path).map_err(|source| LinkError::HtmlUnreadable { path, source })?;
    let base = Url::parse(&article.source_url).map_err(|_| LinkError::UrlUnparseable(article.source_url.clone()))?;
    let scope = store.meta().article_scopes.get(article.acronym());
    let anchors = extract_anchors(&html, scope.map(String::as_str), &base);

    let mut seen: HashSet<PostKey> = HashSet::new();
    let mut links = Vec::new();
    for (anchor_index, raw_url) in anchors.iter().enumerate() {
        match table.resolve(raw_url) {
            Ok(Some(r)) => {
                log::debug!(
                    "{} anchor {anchor_index}: {raw_url} -> {} {}",
                    article.news_id,
                    r.platform,
                    r.post_uid
                );
                if seen.insert(PostKey::new(r.platform, r.post_uid.clone())) {
                    links.push(SocialLink {
                        article_id: article.news_id.clone(),
                        platform: r.platform,
                        raw_url: raw_url.clone(),
                        canonical_url: r.canonical_url,
                        post_uid: r.post_uid,
                        anchor_index,
                    });
                }
            }
            Ok(None) => {
                log::debug!("{} anchor {anchor_index}: {raw_url} -> not a post", article.news_id)
            }
            Err(e) => log::debug!("{} anchor {anchor_index}: dropped ({e})", article.news_id),
        }
    }
    Ok((links, anchors.len()))
}

/// Extracts links for every stored article.
pub fn extract_all(store: &mut Store, table: &PatternTable) -> Result<ExtractReport, LinkError> {
    let articles: Vec<NewsArticle> = store.articles().cloned().collect();
    let mut report = ExtractReport::default();
    for article in &articles {
        report.articles += 1;
        match links_for_article(article, store, table) {
            Ok((links, anchors)) => {
                report.anchors += anchors;
                report.dropped += anchors - links.len();
                for link in links {
                    let existed = store.get::<SocialLink>(&(link.article_id.clone(), link.post_key()));
                    if existed != Some(&link) {
                        report.links += 1;
                    }
                    store.upsert(link)?;
                }
            }
            Err(LinkError::Store(e)) => return Err(e.into()),
            Err(e) => report.failures.push((article.news_id.clone(), e.to_string())),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_platform("https://twitter.com/user_name/status/123").unwrap(),
            Platform::Twitter
        );
        assert_eq!(
            classify_platform("https://www.youtube.com/watch?v=abc").unwrap(),
            Platform::YouTube
        );
        assert_eq!(
            classify_platform("https://example.org/article").unwrap(),
            Platform::Other
        );
        assert_eq!(
            classify_platform("https://twitter.com/user_name").unwrap(),
            Platform::Other
        );
        assert_eq!(
            classify_platform("https://youtu.be/dQw4w9WgXcQ").unwrap(),
            Platform::YouTube
        );
        assert_eq!(
            classify_platform("https://www.youtube.com/channel/UC123").unwrap(),
            Platform::Other
        );
        assert_eq!(classify_platform("https://www.reddit.com/r/").unwrap(), Platform::Other);
        assert_eq!(
            classify_platform("https://www.reddit.com/user/someone").unwrap(),
            Platform::Other
        );
        assert_eq!(classify_platform("mailto:desk@example.org").unwrap(), Platform::Other);
        assert!(matches!(
            classify_platform("not a url"),
            Err(LinkError::UrlUnparseable(_))
        ));
    }

    #[test]
    fn extract_uid_examples() {
        assert_eq!(
            extract_post_uid(
                Platform::Twitter,
                "https://twitter.com/user_name/status/1300839981247913985?s=20"
            )
            .unwrap(),
            "1300839981247913985"
        );
        assert_eq!(
            extract_post_uid(Platform::YouTube, "https://www.youtube.com/watch?v=dQw4w9WgXcQ&t=43").unwrap(),
            "dQw4w9WgXcQ"
        );
        assert_eq!(
            extract_post_uid(Platform::Reddit, "https://www.reddit.com/r/Coronavirus/").unwrap(),
            "Coronavirus"
        );
        assert!(matches!(
            extract_post_uid(Platform::Twitter, "https://twitter.com/i/status/"),
            Err(LinkError::NoPostId { .. })
        ));
    }

    #[test]
    fn other_platform_uids() {
        let cases = [
            (
                Platform::Facebook,
                "https://www.facebook.com/WHO/posts/3019704278074935",
                "3019704278074935",
            ),
            (
                Platform::Facebook,
                "https://www.facebook.com/page/videos/a.1/2520/",
                "2520",
            ),
            (
                Platform::Facebook,
                "https://www.facebook.com/page/posts/pfbid02Xyz",
                "page/posts/pfbid02Xyz",
            ),
            (
                Platform::Facebook,
                "https://www.facebook.com/permalink.php?story_fbid=111&id=222",
                "111",
            ),
            (
                Platform::Instagram,
                "https://www.instagram.com/p/B9xYz12AbC/",
                "B9xYz12AbC",
            ),
            (Platform::Instagram, "https://www.instagram.com/reel/CAbc/", "CAbc"),
            (
                Platform::Wikipedia,
                "https://en.wikipedia.org/wiki/COVID-19_pandemic",
                "COVID-19_pandemic",
            ),
            (
                Platform::Pinterest,
                "https://www.pinterest.co.uk/pin/123456789/",
                "123456789",
            ),
            (
                Platform::TikTok,
                "https://www.tiktok.com/@user/video/6812345678901234567",
                "6812345678901234567",
            ),
            (
                Platform::Gab,
                "https://gab.com/someone/posts/104123456789",
                "104123456789",
            ),
            (Platform::WhatsApp, "https://chat.whatsapp.com/AbCdEf123", "AbCdEf123"),
            (Platform::YouTube, "https://youtu.be/dQw4w9WgXcQ?t=5", "dQw4w9WgXcQ"),
        ];
        for (platform, url, uid) in cases {
            assert_eq!(classify_platform(url).unwrap(), platform, "{url}");
            assert_eq!(extract_post_uid(platform, url).unwrap(), uid, "{url}");
        }
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(
            canonicalize("HTTP://Twitter.com/a/status/5?s=20#x").unwrap(),
            "https://twitter.com/a/status/5"
        );
        assert_eq!(
            canonicalize("https://www.youtube.com/watch?v=A&utm_source=x").unwrap(),
            "https://www.youtube.com/watch?v=A"
        );
        assert_eq!(canonicalize("http://example.org/").unwrap(), "http://example.org/");
        assert_eq!(
            canonicalize("https://www.reddit.com/r/Coronavirus/").unwrap(),
            "https://www.reddit.com/r/Coronavirus"
        );
        assert_eq!(
            canonicalize("https://www.instagram.com/p/AbC/?igshid=xyz").unwrap(),
            "https://www.instagram.com/p/AbC"
        );
    }

    #[test]
    fn anchors_resolve_relative_and_keep_order() {
        let html = r#"<html><body><nav><a href="/home">home</a></nav>
            <div class="article"><p><a href="https://a.example/1">one</a>
            <a href="/relative/2">two</a></p><a href="https://twitter.com/x/status/3">3</a></div>
            <footer><a href="https://twitter.com/x/status/4">f</a></footer></body></html>"#;
        let base = Url::parse("https://factcheck.example.org/story/x").unwrap();
        let anchors = extract_anchors(html, Some("div.article"), &base);
        assert_eq!(
            anchors,
            vec![
                "https://a.example/1",
                "https://factcheck.example.org/relative/2",
                "https://twitter.com/x/status/3"
            ]
        );
        assert!(extract_anchors("<p>nothing</p>", Some("div.article"), &base).is_empty());
        assert_eq!(extract_anchors(html, None, &base).len(), 5);
    }

    #[test]
    fn anchors_inside_tweet_embed() {
        let html = r#"<div class="entry"><blockquote class="twitter-tweet"><p lang="en">Claim text</p>
            &mdash; Someone (@someone) <a href="https://twitter.com/someone/status/1240000000000000001?ref_src=twsrc%5Etfw">March 17, 2020</a>
            </blockquote><script async src="https://platform.twitter.com/widgets.js"></script></div>"#;
        let base = Url::parse("https://factcheck.example.org/a").unwrap();
        let anchors = extract_anchors(html, Some("div.entry"), &base);
        assert_eq!(anchors.len(), 1);
        let resolved = PatternTable::default().resolve(&anchors[0]).unwrap().unwrap();
        assert_eq!(resolved.platform, Platform::Twitter);
        assert_eq!(resolved.post_uid, "1240000000000000001");
        assert_eq!(
            resolved.canonical_url,
            "https://twitter.com/someone/status/1240000000000000001"
        );
    }

    fn decorate(url: &str, params: &[(String, String)], fragment: Option<&str>) -> String {
        let mut out = url.to_string();
        for (k, v) in params {
            out.push(if out.contains('?') { '&' } else { '?' });
            out.push_str(&format!("{k}={v}"));
        }
        if let Some(f) = fragment {
            out.push('#');
            out.push_str(f);
        }
        out
    }

    const BASE_URLS: [&str; 10] = [
        "https://twitter.com/user_name/status/1300839981247913985",
        "https://www.youtube.com/watch?v=dQw4w9WgXcQ",
        "https://www.reddit.com/r/Coronavirus/",
        "https://www.facebook.com/WHO/posts/3019704278074935",
        "https://www.instagram.com/p/B9xYz12AbC/",
        "https://en.wikipedia.org/wiki/Bill_Gates",
        "https://www.tiktok.com/@u/video/6812345678901234567",
        "https://youtu.be/abcDEF12345",
        "https://example.org/news/story",
        "https://twitter.com/user_name",
    ];

    proptest! {
        #[test]
        fn canonicalize_is_idempotent_and_preserves_identity(
            base in 0..BASE_URLS.len(),
            params in proptest::collection::vec(
                (prop_oneof![Just("utm_source".to_string()), Just("utm_medium".to_string()), Just("s".to_string()),
                             Just("t".to_string()), Just("ref_src".to_string()), Just("fbclid".to_string()),
                             Just("igshid".to_string())],
                 "[a-zA-Z0-9]{1,8}"), 0..4),
            fragment in proptest::option::of("[a-z0-9]{1,6}"),
            upper_scheme in any::<bool>(),
        ) {
            let mut url = decorate(BASE_URLS[base], &params, fragment.as_deref());
            if upper_scheme {
                url = url.replacen("https", "HTTP", 1);
            }
            let c1 = canonicalize(&url).unwrap();
            prop_assert_eq!(canonicalize(&c1).unwrap(), c1.clone());
            let plain = BASE_URLS[base];
            let platform = classify_platform(plain).unwrap();
            prop_assert_eq!(classify_platform(&url).unwrap(), platform);
            prop_assert_eq!(classify_platform(&c1).unwrap(), platform);
            if platform != Platform::Other {
                let uid = extract_post_uid(platform, plain).unwrap();
                prop_assert_eq!(extract_post_uid(platform, &url).unwrap(), uid.clone());
                prop_assert_eq!(extract_post_uid(platform, &c1).unwrap(), uid);
            }
        }
    }
}
