//! Character n-gram language identification with out-of-place rank
//! distance.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::store::{Store, StoreError};
use crate::text::collapse_whitespace;

/// Profile length and the penalty for a gram missing from a profile.
pub const MAX_RANKS: usize = 400;
pub const MIN_CORPUS_CHARS: usize = 2000;
pub const MIN_TEXT_CHARS: usize = 40;

#[derive(Debug, thiserror::Error)]
pub enum LangIdError {
    #[error("corpus for {iso_code} has {chars} characters, need {MIN_CORPUS_CHARS}")]
    CorpusTooSmall { iso_code: String, chars: usize },
    #[error("text has {0} characters, need {MIN_TEXT_CHARS}")]
    TextTooShort(usize),
    #[error("no language profiles loaded")]
    NoProfiles,
    #[error("invalid profile: {0}")]
    ProfileInvalid(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProfileFile", into = "ProfileFile")]
pub struct LanguageProfile {
    iso_code: String,
    ngram_ranks: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    iso_code: String,
    ngram_ranks: Vec<String>,
}

impl TryFrom<ProfileFile> for LanguageProfile {
    type Error = LangIdError;
    fn try_from(f: ProfileFile) -> Result<Self, LangIdError> {
        LanguageProfile::new(f.iso_code, f.ngram_ranks)
    }
}

impl From<LanguageProfile> for ProfileFile {
    fn from(p: LanguageProfile) -> Self {
        ProfileFile {
            iso_code: p.iso_code,
            ngram_ranks: p.ngram_ranks,
        }
    }
}

fn is_iso_code(code: &str) -> bool {
    code.len() == 2 && code.bytes().all(|b| b.is_ascii_lowercase())
}

impl LanguageProfile {
    pub fn new(iso_code: String, ngram_ranks: Vec<String>) -> Result<Self, LangIdError> {
        if !is_iso_code(&iso_code) {
            return Err(LangIdError::ProfileInvalid(format!(
                "{iso_code:?} is not a two-letter lowercase code"
            )));
        }
        if ngram_ranks.is_empty() || ngram_ranks.len() > MAX_RANKS {
            return Err(LangIdError::ProfileInvalid(format!(
                "{iso_code}: {} ranks, expected 1..={MAX_RANKS}",
                ngram_ranks.len()
            )));
        }
        let mut index = HashMap::with_capacity(ngram_ranks.len());
        for (rank, gram) in ngram_ranks.iter().enumerate() {
            if index.insert(gram.clone(), rank).is_some() {
                return Err(LangIdError::ProfileInvalid(format!(
                    "{iso_code}: duplicate gram {gram:?}"
                )));
            }
        }
        Ok(Self {
            iso_code,
            ngram_ranks,
            index,
        })
    }

    pub fn iso_code(&self) -> &str {
        &self.iso_code
    }

    pub fn ngram_ranks(&self) -> &[String] {
        &self.ngram_ranks
    }

    pub fn rank(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).copied()
    }

    pub fn load(path: &Path) -> Result<Self, LangIdError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| LangIdError::ProfileInvalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&json).map_err(|e| LangIdError::ProfileInvalid(format!("{}: {e}", path.display())))
    }
}

fn is_letter(c: char) -> bool {
    // Devanagari and Tamil vowel signs and viramas are not all Alphabetic.
    c.is_alphabetic() || (matches!(c, '\u{0900}'..='\u{0963}' | '\u{0971}'..='\u{097F}' | '\u{0B80}'..='\u{0BE5}'))
}

/// Lowercased letters with every other run of characters collapsed to one
/// space, padded with a space on both ends.
pub fn normalize(text: &str) -> Vec<char> {
    let mut out = vec![' '];
    for c in text.chars() {
        if is_letter(c) {
            out.extend(c.to_lowercase());
        } else if out.last() != Some(&' ') {
            out.push(' ');
        }
    }
    if out.last() != Some(&' ') {
        out.push(' ');
    }
    out
}

/// Counts of every 1-, 2- and 3-gram of the normalized text.
pub fn ngram_counts(text: &str) -> HashMap<String, usize> {
    let chars = normalize(text);
    let mut counts = HashMap::new();
    for n in 1..=3 {
        for w in chars.windows(n) {
            *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    counts
}

/// The `MAX_RANKS` most frequent grams, ties broken lexicographically.
fn ranked_grams(text: &str) -> Vec<String> {
    let mut grams: Vec<(String, usize)> = ngram_counts(text).into_iter().collect();
    grams.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    grams.truncate(MAX_RANKS);
    grams.into_iter().map(|(g, _)| g).collect()
}

pub fn build_profile(iso_code: &str, corpus: &str) -> Result<LanguageProfile, LangIdError> {
    let chars = corpus.chars().count();
    if chars < MIN_CORPUS_CHARS {
        return Err(LangIdError::CorpusTooSmall {
            iso_code: iso_code.to_string(),
            chars,
        });
    }
    LanguageProfile::new(iso_code.to_string(), ranked_grams(corpus))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub iso_code: String,
    pub confidence: f64,
    pub distance: usize,
}

/// Out-of-place distance between a document's ranked grams and a profile.
pub fn out_of_place(doc: &[String], profile: &LanguageProfile) -> usize {
    doc.iter()
        .enumerate()
        .map(|(i, g)| profile.rank(g).map_or(MAX_RANKS, |j| i.abs_diff(j)))
        .sum()
}

/// Picks the profile at the smallest out-of-place distance; ties go to the
/// smaller iso code. Confidence is `1 - best / worst`, with `worst` the
/// distance when no document gram occurs in the profile.
pub fn detect_language(text: &str, profiles: &[LanguageProfile]) -> Result<Detection, LangIdError> {
    let len = collapse_whitespace(text).chars().count();
    if len < MIN_TEXT_CHARS {
        return Err(LangIdError::TextTooShort(len));
    }
    let doc = ranked_grams(text);
    let best = profiles
        .iter()
        .map(|p| (out_of_place(&doc, p), p.iso_code()))
        .min()
        .ok_or(LangIdError::NoProfiles)?;
    let worst = doc.len() * MAX_RANKS;
    Ok(Detection {
        iso_code: best.1.to_string(),
        confidence: 1.0 - best.0 as f64 / worst as f64,
        distance: best.0,
    })
}

/// Training corpora for the built-in profiles.
pub const BUILTIN_CORPORA: [(&str, &str); 8] = [
    ("de", include_str!("../data/langid/corpus/de.txt")),
    ("en", include_str!("../data/langid/corpus/en.txt")),
    ("es", include_str!("../data/langid/corpus/es.txt")),
    ("fr", include_str!("../data/langid/corpus/fr.txt")),
    ("hi", include_str!("../data/langid/corpus/hi.txt")),
    ("it", include_str!("../data/langid/corpus/it.txt")),
    ("pt", include_str!("../data/langid/corpus/pt.txt")),
    ("ta", include_str!("../data/langid/corpus/ta.txt")),
];

pub fn builtin_profiles() -> &'static [LanguageProfile] {
    static PROFILES: OnceLock<Vec<LanguageProfile>> = OnceLock::new();
    PROFILES.get_or_init(|| {
        BUILTIN_CORPORA
            .iter()
            .map(|(iso, corpus)| build_profile(iso, corpus).expect("built-in corpus"))
            .collect()
    })
}

/// Every `*.json` profile in `dir`, ordered by iso code.
pub fn load_profiles(dir: &Path) -> Result<Vec<LanguageProfile>, LangIdError> {
    let entries = std::fs::read_dir(dir).map_err(|e| LangIdError::ProfileInvalid(format!("{}: {e}", dir.display())))?;
    let mut profiles = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| LangIdError::ProfileInvalid(e.to_string()))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            profiles.push(LanguageProfile::load(&path)?);
        }
    }
    if profiles.is_empty() {
        return Err(LangIdError::NoProfiles);
    }
    profiles.sort_by(|a, b| a.iso_code.cmp(&b.iso_code));
    let mut seen = HashSet::new();
    for p in &profiles {
        if !seen.insert(p.iso_code.clone()) {
            return Err(LangIdError::ProfileInvalid(format!("two profiles for {}", p.iso_code)));
        }
    }
    Ok(profiles)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LangDetectReport {
    pub detected: usize,
    pub already_set: usize,
    /// Articles left without a language because the body was too short.
    pub too_short: Vec<String>,
}

/// Fills `language` on every stored article that lacks one.
pub fn detect_store(store: &mut Store, profiles: &[LanguageProfile]) -> Result<LangDetectReport, LangIdError> {
    if profiles.is_empty() {
        return Err(LangIdError::NoProfiles);
    }
    let mut report = LangDetectReport::default();
    let pending: Vec<_> = store
        .articles()
        .filter(|a| {
            let set = a.language.is_some();
            if set {
                report.already_set += 1;
            }
            !set
        })
        .cloned()
        .collect();
    for mut article in pending {
        match detect_language(&article.body_text, profiles) {
            Ok(d) => {
                article.language = Some(d.iso_code);
                store.upsert(article)?;
                report.detected += 1;
            }
            Err(LangIdError::TextTooShort(_)) => report.too_short.push(article.news_id),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
