use std::path::Path;

use amused_core::langid::{builtin_profiles, detect_language, load_profiles};

fn data() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/langid"))
}

fn eval_set() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(data().join("eval")).unwrap() {
        let path = entry.unwrap().path();
        let iso = path.file_stem().unwrap().to_string_lossy().into_owned();
        for snippet in std::fs::read_to_string(&path).unwrap().split("\n\n") {
            let snippet = snippet.trim();
            if !snippet.is_empty() {
                out.push((iso.clone(), snippet.to_string()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn eval_set_shape() {
    let set = eval_set();
    let mut langs: Vec<_> = set.iter().map(|(iso, _)| iso.as_str()).collect();
    langs.dedup();
    assert!(langs.len() >= 8);
    for lang in &langs {
        assert!(set.iter().filter(|(iso, _)| iso == lang).count() >= 10);
    }
    assert!(set.iter().all(|(_, s)| s.chars().count() >= 200));
}

#[test]
fn eval_accuracy() {
    let set = eval_set();
    let profiles = load_profiles(&data().join("profiles")).unwrap();
    let mut wrong = Vec::new();
    for (iso, snippet) in &set {
        let got = detect_language(snippet, &profiles).unwrap().iso_code;
        if &got != iso {
            wrong.push((iso.clone(), got));
        }
    }
    let accuracy = 1.0 - wrong.len() as f64 / set.len() as f64;
    assert!(accuracy >= 0.95, "accuracy {accuracy}, misses {wrong:?}");
}

#[test]
fn shipped_profiles_match_corpora() {
    let shipped = load_profiles(&data().join("profiles")).unwrap();
    assert_eq!(shipped, builtin_profiles());
}
