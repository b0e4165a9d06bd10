//! End-to-end run of the automated stages: ingest, language detection,
//! link extraction, fetching, labeling and dedupe. Sampling and review stay
//! separate commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::fetch::{fetch_all, FetchError, FetcherRegistry};
use crate::ingest::{ingest_manifest, FixtureLoader, IngestError, SourceManifest};
use crate::labeling::{dedupe, label_all, LabelError, LabelMapping};
use crate::langid::{builtin_profiles, detect_store, load_profiles, LangIdError};
use crate::links::{builtin_patterns, extract_all, LinkError, PatternTable};
use crate::store::{Store, StoreError};

pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Open,
    Ingest,
    Langdetect,
    Extract,
    Fetch,
    Label,
    Dedupe,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Open => "open",
            Stage::Ingest => "ingest",
            Stage::Langdetect => "langdetect",
            Stage::Extract => "extract",
            Stage::Fetch => "fetch",
            Stage::Label => "label",
            Stage::Dedupe => "dedupe",
        })
    }
}

fn stage_err<E>(stage: Stage) -> impl FnOnce(E) -> PipelineError
where
    E: std::error::Error + Send + Sync + 'static,
{
    move |e| PipelineError::Stage {
        stage,
        source: Box::new(e),
    }
}

/// Run configuration. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifests: Vec<PathBuf>,
    pub fixtures: PathBuf,
    pub store: PathBuf,
    #[serde(default)]
    pub mapping: Option<PathBuf>,
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub patterns: Option<PathBuf>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

fn default_concurrency() -> usize {
    DEFAULT_CONCURRENCY
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&json)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.manifests.iter_mut().for_each(join);
        join(&mut self.fixtures);
        join(&mut self.store);
        for p in [&mut self.mapping, &mut self.profiles, &mut self.patterns]
            .into_iter()
            .flatten()
        {
            join(p);
        }
    }

    /// Checks that every input exists before the store is touched.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |what: &str, p: &Path| PipelineError::ConfigInvalid(format!("{what} {} not found", p.display()));
        if self.manifests.is_empty() {
            return Err(PipelineError::ConfigInvalid("no manifests listed".into()));
        }
        if self.concurrency == 0 {
            return Err(PipelineError::ConfigInvalid("concurrency must be at least 1".into()));
        }
        if let Some(m) = self.manifests.iter().find(|m| !m.is_file()) {
            return Err(invalid("manifest", m));
        }
        if !self.fixtures.is_dir() {
            return Err(invalid("fixtures dir", &self.fixtures));
        }
        if let Some(p) = self.mapping.as_ref().filter(|p| !p.is_file()) {
            return Err(invalid("mapping", p));
        }
        if let Some(p) = self.profiles.as_ref().filter(|p| !p.is_dir()) {
            return Err(invalid("profiles dir", p));
        }
        if let Some(p) = self.patterns.as_ref().filter(|p| !p.is_file()) {
            return Err(invalid("patterns", p));
        }
        Ok(())
    }
}

/// Records each stage added to the store.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PipelineReport {
    pub articles: usize,
    pub languages_detected: usize,
    pub links: usize,
    pub unique_posts: usize,
    pub fetched: usize,
    pub deleted: usize,
    pub unavailable: usize,
    pub labeled: usize,
    pub duplicates_dropped: usize,
    pub ingest_failures: usize,
    pub extract_failures: usize,
}

impl PipelineReport {
    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

pub fn run_pipeline(config: &RunConfig, clock: &dyn Clock) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let mut report = PipelineReport::default();

    // Load every input up front so a bad file fails before any write.
    let mut manifests = Vec::new();
    for path in &config.manifests {
        let manifest = SourceManifest::load(path).map_err(stage_err::<IngestError>(Stage::Ingest))?;
        let profile = manifest
            .load_profile()
            .map_err(stage_err::<IngestError>(Stage::Ingest))?;
        manifests.push((manifest, profile));
    }
    let profiles = match &config.profiles {
        Some(dir) => load_profiles(dir).map_err(stage_err::<LangIdError>(Stage::Langdetect))?,
        None => builtin_profiles().to_vec(),
    };
    let table = match &config.patterns {
        Some(p) => PatternTable::load(p),
        None => PatternTable::new(builtin_patterns()),
    }
    .map_err(stage_err::<LinkError>(Stage::Extract))?;
    let registry = FetcherRegistry::fixtures(&config.fixtures, config.concurrency)
        .map_err(stage_err::<FetchError>(Stage::Fetch))?;
    let mapping = match &config.mapping {
        Some(p) => LabelMapping::load(p).map_err(stage_err::<LabelError>(Stage::Label))?,
        None => LabelMapping::default(),
    };

    let mut store = Store::open(&config.store).map_err(stage_err::<StoreError>(Stage::Open))?;

    for (manifest, profile) in &manifests {
        let loader = FixtureLoader {
            base_dir: manifest.base_dir.clone(),
        };
        let r =
            ingest_manifest(manifest, profile, &loader, &mut store).map_err(stage_err::<IngestError>(Stage::Ingest))?;
        for f in &r.failures {
            log::warn!("ingest {}: {}", f.source_url, f.detail);
        }
        report.articles += r.articles_created;
        report.ingest_failures += r.failures.len();
    }
    log::info!("ingest: {} new articles", report.articles);

    let r = detect_store(&mut store, &profiles).map_err(stage_err::<LangIdError>(Stage::Langdetect))?;
    report.languages_detected = r.detected;

    let r = extract_all(&mut store, &table).map_err(stage_err::<LinkError>(Stage::Extract))?;
    for (id, e) in &r.failures {
        log::warn!("extract {id}: {e}");
    }
    report.links = r.links;
    report.extract_failures = r.failures.len();
    log::info!("extract: {} new links from {} anchors", r.links, r.anchors);

    let before = store.posts().count();
    let r = fetch_all(&mut store, &registry, clock, false).map_err(stage_err::<FetchError>(Stage::Fetch))?;
    report.unique_posts = store.posts().count() - before;
    report.fetched = r.fetched;
    report.deleted = r.deleted;
    report.unavailable = r.unavailable;
    log::info!(
        "fetch: {} fetched, {} deleted, {} unavailable",
        r.fetched,
        r.deleted,
        r.unavailable
    );

    let r = label_all(&mut store, &mapping).map_err(stage_err::<LabelError>(Stage::Label))?;
    report.labeled = r.labeled;

    let r = dedupe(&mut store, clock).map_err(stage_err::<LabelError>(Stage::Dedupe))?;
    report.duplicates_dropped = r.duplicates_dropped;
    log::info!(
        "label: {} new records, {} duplicates dropped",
        report.labeled,
        r.duplicates_dropped
    );
    Ok(report)
}
