use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use amused_core::clock::{Clock, FixedClock, SystemClock};
use amused_core::fetch::live::{default_rate, live_fetcher};
use amused_core::fetch::{fetch_all, FetcherRegistry};
use amused_core::ingest::{ingest_manifest, DocumentLoader, FixtureLoader, HttpLoader, SourceManifest};
use amused_core::labeling::{dedupe, label_all, LabelMapping};
use amused_core::langid::{builtin_profiles, detect_store, load_profiles};
use amused_core::links::{builtin_patterns, extract_all, PatternTable};
use amused_core::model::Platform;
use amused_core::pipeline::{run_pipeline, RunConfig, DEFAULT_CONCURRENCY};
use amused_core::reporting::{
    class_distribution, export_jsonl, link_coverage, platform_summary, render, timeline, Format, DEFAULT_MIN_POSTS,
};
use amused_core::store::Store;
use amused_core::verification::{sample_for_review, ReviewQueue, DEFAULT_RATE};
use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "amused",
    version,
    about = "Label social-media posts cited by fact-check articles"
)]
struct Cli {
    /// Only report errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Debug output, including per-anchor extraction decisions.
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Pin the clock (RFC 3339) so timestamps in the store are reproducible.
    #[arg(long, global = true, value_name = "TIMESTAMP")]
    now: Option<DateTime<Utc>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse fact-check articles listed in a source manifest.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Download `source_url` instead of reading `html_path`.
        #[arg(long)]
        live: bool,
    },
    /// Fill in the language of articles that lack one.
    Langdetect {
        #[arg(long)]
        store: PathBuf,
        /// Directory of language profile JSON files; built-in profiles otherwise.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Find social-media post links in stored articles.
    Extract {
        #[arg(long)]
        store: PathBuf,
        /// Platform pattern table replacing the built-in one.
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Fetch every linked post once.
    Fetch {
        #[arg(long)]
        store: PathBuf,
        /// Directory with one subdirectory of post JSON files per platform.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
        concurrency: usize,
        /// Fetch posts again even if already stored.
        #[arg(long)]
        refresh: bool,
        /// Platforms to fetch from the live APIs instead of fixtures.
        #[arg(long, value_delimiter = ',', value_name = "PLATFORM,...")]
        live: Vec<Platform>,
    },
    /// Propagate article verdicts onto fetched posts.
    Label {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Keep one labeled record per post.
    Dedupe {
        #[arg(long)]
        store: PathBuf,
    },
    /// Draw the per-platform review sample.
    Sample {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RATE)]
        rate: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Serve the review API and UI.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Built review UI assets.
        #[arg(long = "static", value_name = "DIR")]
        static_dir: Option<PathBuf>,
    },
    /// Print a corpus report.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long, default_value = "table")]
        format: Format,
        /// Timeline only: leave out platforms with this many posts or fewer.
        #[arg(long, default_value_t = DEFAULT_MIN_POSTS)]
        min_posts: usize,
    },
    /// Write the labeled corpus as JSON lines.
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        confirmed_only: bool,
    },
    /// Run ingest through dedupe from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the config's manifest list (repeatable).
        #[arg(long = "manifest")]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        patterns: Option<PathBuf>,
        #[arg(long)]
        concurrency: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Platform,
    Class,
    Timeline,
    Coverage,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn open(path: &Path) -> Result<Store> {
    Store::open(path).with_context(|| format!("cannot open store {}", path.display()))
}

fn execute(cli: Cli) -> Result<()> {
    let clock: Arc<dyn Clock> = match cli.now {
        Some(t) => Arc::new(FixedClock(t)),
        None => Arc::new(SystemClock),
    };
    match cli.command {
        Command::Ingest { manifest, store, live } => {
            let m = SourceManifest::load(&manifest)?;
            let profile = m.load_profile()?;
            let loader: Box<dyn DocumentLoader> = if live {
                Box::new(HttpLoader::new()?)
            } else {
                Box::new(FixtureLoader {
                    base_dir: m.base_dir.clone(),
                })
            };
            let mut store = open(&store)?;
            let report = ingest_manifest(&m, &profile, loader.as_ref(), &mut store)?;
            for f in &report.failures {
                log::warn!("{}: {}", f.source_url, f.detail);
            }
            print_json(&report)
        }
        Command::Langdetect { store, profiles } => {
            let profiles = match profiles {
                Some(dir) => load_profiles(&dir)?,
                None => builtin_profiles().to_vec(),
            };
            let mut store = open(&store)?;
            print_json(&detect_store(&mut store, &profiles)?)
        }
        Command::Extract { store, patterns } => {
            let table = match patterns {
                Some(p) => PatternTable::load(&p)?,
                None => PatternTable::new(builtin_patterns())?,
            };
            let mut store = open(&store)?;
            let report = extract_all(&mut store, &table)?;
            for (id, e) in &report.failures {
                log::warn!("{id}: {e}");
            }
            print_json(&report)
        }
        Command::Fetch {
            store,
            fixtures,
            concurrency,
            refresh,
            live,
        } => {
            let mut registry = match &fixtures {
                Some(dir) => FetcherRegistry::fixtures(dir, concurrency)?,
                None if live.is_empty() => bail!("either --fixtures or --live is required"),
                None => FetcherRegistry::new(concurrency)?,
            };
            for platform in live {
                registry.register(platform, Arc::from(live_fetcher(platform)?), default_rate(platform))?;
            }
            let mut store = open(&store)?;
            print_json(&fetch_all(&mut store, &registry, clock.as_ref(), refresh)?)
        }
        Command::Label { store, mapping } => {
            let mapping = match mapping {
                Some(p) => LabelMapping::load(&p)?,
                None => LabelMapping::default(),
            };
            let mut store = open(&store)?;
            print_json(&label_all(&mut store, &mapping)?)
        }
        Command::Dedupe { store } => {
            let mut store = open(&store)?;
            print_json(&dedupe(&mut store, clock.as_ref())?)
        }
        Command::Sample { store, rate, seed } => {
            let mut store = open(&store)?;
            print_json(&sample_for_review(&mut store, rate, seed, clock.as_ref())?)
        }
        Command::Serve {
            store,
            port,
            host,
            static_dir,
        } => {
            let queue = Arc::new(ReviewQueue::new(open(&store)?, clock));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = amused_server::bind(SocketAddr::new(host, port)).await?;
                // The bound address is data: with --port 0 callers need it.
                println!("http://{}", listener.local_addr()?);
                std::io::stdout().flush()?;
                let shutdown = async {
                    if let Err(e) = tokio::signal::ctrl_c().await {
                        log::error!("cannot listen for interrupt: {e}");
                        std::future::pending::<()>().await;
                    }
                    log::info!("interrupt received, shutting down");
                };
                amused_server::serve(listener, queue, static_dir.as_deref(), shutdown).await?;
                Ok(())
            })
        }
        Command::Report {
            store,
            kind,
            format,
            min_posts,
        } => {
            let store = open(&store)?;
            let text = match kind {
                ReportKind::Platform => render(&platform_summary(&store), format)?,
                ReportKind::Class => render(&class_distribution(&store), format)?,
                ReportKind::Timeline => render(&timeline(&store, min_posts), format)?,
                ReportKind::Coverage => render(&[link_coverage(&store)], format)?,
            };
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if format == Format::Json {
                writeln!(out)?;
            }
            Ok(())
        }
        Command::Export {
            store,
            out,
            confirmed_only,
        } => {
            let store = open(&store)?;
            let n = export_jsonl(&store, &out, confirmed_only)?;
            log::info!("wrote {n} records to {}", out.display());
            print_json(&serde_json::json!({ "records": n, "out": out }))
        }
        Command::Run {
            config,
            manifests,
            store,
            fixtures,
            mapping,
            profiles,
            patterns,
            concurrency,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if !manifests.is_empty() {
                cfg.manifests = manifests;
            }
            cfg.store = store.unwrap_or(cfg.store);
            cfg.fixtures = fixtures.unwrap_or(cfg.fixtures);
            cfg.mapping = mapping.or(cfg.mapping);
            cfg.profiles = profiles.or(cfg.profiles);
            cfg.patterns = patterns.or(cfg.patterns);
            cfg.concurrency = concurrency.unwrap_or(cfg.concurrency);
            print_json(&run_pipeline(&cfg, clock.as_ref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amused: {e:#}");
            ExitCode::FAILURE
        }
    }
}
