//! Rebuilds `data/langid/profiles/*.json` from the training corpora.
//!
//! cargo run -p amused-core --example build_langid_profiles [out_dir]

use std::path::PathBuf;

use amused_core::langid::{build_profile, BUILTIN_CORPORA};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/langid/profiles"));
    std::fs::create_dir_all(&out)?;
    for (iso, corpus) in BUILTIN_CORPORA {
        let profile = build_profile(iso, corpus)?;
        let path = out.join(format!("{iso}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&profile)? + "\n")?;
        println!("{} ({} grams)", path.display(), profile.ngram_ranks().len());
    }
    Ok(())
}
