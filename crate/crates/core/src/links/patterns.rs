//! Platform URL pattern table.
//!
//! A URL belongs to a platform when its host contains one of the platform's
//! host keywords *and* one of its path rules recognises the URL's shape. The
//! same rule then locates the post id. Shape and id are separate so that a
//! URL like `twitter.com/i/status/` is still recognised as a tweet link that
//! happens to carry no id.

use std::path::Path;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::model::Platform;

use super::LinkError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformPattern {
    pub platform: Platform,
    pub host_keywords: Vec<String>,
    pub path_rule: Vec<PathRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRule {
    /// Limits the rule to hosts containing one of these substrings. Empty
    /// means any of the pattern's host keywords.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hosts: Vec<String>,
    #[serde(flatten)]
    pub locator: UidLocator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "locator", rename_all = "snake_case")]
pub enum UidLocator {
    /// The id is the path segment following `marker`. With `anchored` the
    /// path must start with the marker and the segment must be present for
    /// the shape to match; `to_end` takes the rest of the path instead of
    /// one segment.
    SegmentAfter {
        marker: String,
        #[serde(default)]
        anchored: bool,
        #[serde(default)]
        numeric: bool,
        #[serde(default)]
        to_end: bool,
    },
    /// The id is the value of query parameter `name`.
    QueryParam { name: String },
    /// The id is the first path segment (short hosts such as `youtu.be`).
    FirstSegment,
    /// Path contains one of `markers`; the id is the last all-digit segment
    /// after the marker, or the whole path when none is numeric.
    TrailingNumeric { markers: Vec<String> },
    /// Path ends in `script`; the id is query parameter `param`.
    ScriptParam { script: String, param: String },
}

/// Path with trailing slashes removed and exactly one appended, so marker
/// tests behave the same before and after canonicalization.
fn slash_path(url: &Url) -> String {
    let trimmed = url.path().trim_end_matches('/');
    format!("{trimmed}/")
}

fn query_value(url: &Url, name: &str) -> Option<String> {
    url.query_pairs().find(|(k, _)| k == name).map(|(_, v)| v.into_owned())
}

fn segments(path: &str) -> impl Iterator<Item = &str> {
    path.split('/').filter(|s| !s.is_empty())
}

impl UidLocator {
    fn shape_matches(&self, url: &Url) -> bool {
        let path = slash_path(url);
        match self {
            UidLocator::SegmentAfter { marker, anchored, .. } => {
                if *anchored {
                    path.strip_prefix(marker.as_str())
                        .is_some_and(|rest| segments(rest).next().is_some())
                } else {
                    path.contains(marker.as_str())
                }
            }
            UidLocator::QueryParam { name } => url.query_pairs().any(|(k, _)| k == name.as_str()),
            UidLocator::FirstSegment => segments(&path).next().is_some(),
            UidLocator::TrailingNumeric { markers } => markers.iter().any(|m| path.contains(m.as_str())),
            UidLocator::ScriptParam { script, .. } => path.trim_end_matches('/').ends_with(&format!("/{script}")),
        }
    }

    fn locate(&self, url: &Url) -> Option<String> {
        let path = slash_path(url);
        let uid = match self {
            UidLocator::SegmentAfter {
                marker,
                numeric,
                to_end,
                ..
            } => {
                let at = path.find(marker.as_str())?;
                let rest = &path[at + marker.len()..];
                let id = if *to_end {
                    rest.trim_end_matches('/').to_string()
                } else {
                    segments(rest).next().unwrap_or("").to_string()
                };
                if *numeric && !id.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                id
            }
            UidLocator::QueryParam { name } => query_value(url, name)?,
            UidLocator::FirstSegment => segments(&path).next()?.to_string(),
            UidLocator::TrailingNumeric { markers } => {
                let (at, marker) = markers
                    .iter()
                    .filter_map(|m| path.find(m.as_str()).map(|at| (at, m)))
                    .min_by_key(|(at, _)| *at)?;
                let after: Vec<&str> = segments(&path[at + marker.len()..]).collect();
                if after.is_empty() {
                    return None;
                }
                match after.iter().rev().find(|s| s.bytes().all(|b| b.is_ascii_digit())) {
                    Some(id) => id.to_string(),
                    None => path.trim_matches('/').to_string(),
                }
            }
            UidLocator::ScriptParam { param, .. } => query_value(url, param)?,
        };
        (!uid.is_empty()).then_some(uid)
    }
}

impl PathRule {
    fn host_allowed(&self, host: &str) -> bool {
        self.hosts.is_empty() || self.hosts.iter().any(|h| host.contains(h.as_str()))
    }
}

impl PlatformPattern {
    pub fn host_matches(&self, host: &str) -> bool {
        self.host_keywords.iter().any(|k| host.contains(k.as_str()))
    }

    /// First path rule whose host restriction and URL shape both match.
    pub fn matching_rule(&self, url: &Url) -> Option<&PathRule> {
        let host = url.host_str()?;
        if !self.host_matches(host) {
            return None;
        }
        self.path_rule
            .iter()
            .find(|r| r.host_allowed(host) && r.locator.shape_matches(url))
    }
}

fn seg(marker: &str, numeric: bool) -> PathRule {
    PathRule {
        hosts: vec![],
        locator: UidLocator::SegmentAfter {
            marker: marker.into(),
            anchored: false,
            numeric,
            to_end: false,
        },
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// The built-in table. Twitter, YouTube and Reddit use the plain host keyword
/// and path rules; the rest extend them by analogy.
pub fn builtin_patterns() -> Vec<PlatformPattern> {
    vec![
        PlatformPattern {
            platform: Platform::Twitter,
            host_keywords: strings(&["twitter.com"]),
            path_rule: vec![seg("/status/", true)],
        },
        PlatformPattern {
            platform: Platform::YouTube,
            host_keywords: strings(&["youtube.com", "youtu.be"]),
            path_rule: vec![
                PathRule {
                    hosts: strings(&["youtube.com"]),
                    locator: UidLocator::QueryParam { name: "v".into() },
                },
                PathRule {
                    hosts: strings(&["youtu.be"]),
                    locator: UidLocator::FirstSegment,
                },
            ],
        },
        PlatformPattern {
            platform: Platform::Reddit,
            host_keywords: strings(&["reddit.com"]),
            path_rule: vec![PathRule {
                hosts: vec![],
                locator: UidLocator::SegmentAfter {
                    marker: "/r/".into(),
                    anchored: true,
                    numeric: false,
                    to_end: false,
                },
            }],
        },
        PlatformPattern {
            platform: Platform::Facebook,
            host_keywords: strings(&["facebook.com"]),
            path_rule: vec![
                PathRule {
                    hosts: vec![],
                    locator: UidLocator::TrailingNumeric {
                        markers: strings(&["/posts/", "/photos/", "/videos/"]),
                    },
                },
                PathRule {
                    hosts: vec![],
                    locator: UidLocator::ScriptParam {
                        script: "permalink.php".into(),
                        param: "story_fbid".into(),
                    },
                },
                PathRule {
                    hosts: vec![],
                    locator: UidLocator::ScriptParam {
                        script: "story.php".into(),
                        param: "story_fbid".into(),
                    },
                },
            ],
        },
        PlatformPattern {
            platform: Platform::Instagram,
            host_keywords: strings(&["instagram.com"]),
            path_rule: vec![seg("/p/", false), seg("/tv/", false), seg("/reel/", false)],
        },
        PlatformPattern {
            platform: Platform::Wikipedia,
            host_keywords: strings(&["wikipedia.org"]),
            path_rule: vec![PathRule {
                hosts: vec![],
                locator: UidLocator::SegmentAfter {
                    marker: "/wiki/".into(),
                    anchored: true,
                    numeric: false,
                    to_end: true,
                },
            }],
        },
        PlatformPattern {
            platform: Platform::Pinterest,
            host_keywords: strings(&["pinterest."]),
            path_rule: vec![seg("/pin/", false)],
        },
        PlatformPattern {
            platform: Platform::TikTok,
            host_keywords: strings(&["tiktok.com"]),
            path_rule: vec![seg("/video/", true)],
        },
        PlatformPattern {
            platform: Platform::Gab,
            host_keywords: strings(&["gab.com"]),
            path_rule: vec![seg("/posts/", false)],
        },
        PlatformPattern {
            platform: Platform::WhatsApp,
            host_keywords: strings(&["whatsapp.com"]),
            path_rule: vec![PathRule {
                hosts: strings(&["chat.whatsapp.com"]),
                locator: UidLocator::FirstSegment,
            }],
        },
    ]
}

/// A validated set of platform patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternTable {
    patterns: Vec<PlatformPattern>,
}

impl Default for PatternTable {
    fn default() -> Self {
        Self {
            patterns: builtin_patterns(),
        }
    }
}

impl PatternTable {
    pub fn new(patterns: Vec<PlatformPattern>) -> Result<Self, LinkError> {
        let mut seen = std::collections::HashSet::new();
        for p in &patterns {
            if p.platform == Platform::Other {
                return Err(LinkError::PatternsInvalid("Other cannot have a pattern".into()));
            }
            if !seen.insert(p.platform) {
                return Err(LinkError::PatternsInvalid(format!(
                    "{} has more than one pattern",
                    p.platform
                )));
            }
            if p.host_keywords.is_empty() || p.host_keywords.iter().any(|k| k.is_empty()) {
                return Err(LinkError::PatternsInvalid(format!(
                    "{} needs non-empty host_keywords",
                    p.platform
                )));
            }
            if p.path_rule.is_empty() {
                return Err(LinkError::PatternsInvalid(format!("{} has no path_rule", p.platform)));
            }
        }
        Ok(Self { patterns })
    }

    pub fn from_json(json: &str) -> Result<Self, LinkError> {
        let patterns: Vec<PlatformPattern> =
            serde_json::from_str(json).map_err(|e| LinkError::PatternsInvalid(e.to_string()))?;
        Self::new(patterns)
    }

    pub fn load(path: &Path) -> Result<Self, LinkError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| LinkError::PatternsInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn patterns(&self) -> &[PlatformPattern] {
        &self.patterns
    }

    pub fn pattern(&self, platform: Platform) -> Option<&PlatformPattern> {
        self.patterns.iter().find(|p| p.platform == platform)
    }

    /// Whether `host` belongs to any supported platform.
    pub fn is_platform_host(&self, host: &str) -> bool {
        self.patterns.iter().any(|p| p.host_matches(host))
    }

    pub(super) fn classify_url(&self, url: &Url) -> Platform {
        if !matches!(url.scheme(), "http" | "https") {
            return Platform::Other;
        }
        self.patterns
            .iter()
            .find(|p| p.matching_rule(url).is_some())
            .map_or(Platform::Other, |p| p.platform)
    }

    pub(super) fn locate_uid(&self, platform: Platform, url: &Url) -> Option<String> {
        self.pattern(platform)?.matching_rule(url)?.locator.locate(url)
    }
}
