use std::fs;
use std::path::Path;

use scriptenc::corpus::{self, synth, RunConfig, Split, UNK_ID};
use scriptenc::parser::{parse_text, ParserConfig};

fn config(dir: &Path, seed: u64) -> RunConfig {
    RunConfig {
        seed,
        scripts: dir.join("scripts"),
        tags: dir.join("tags.json"),
        embeddings: dir.join("embeddings.txt"),
        ..RunConfig::default()
    }
}

fn corpus_dir(scripts: usize) -> (tempfile::TempDir, synth::SynthCorpus) {
    let dir = tempfile::tempdir().unwrap();
    let s = synth::generate(&synth::SynthConfig {
        scripts,
        ..synth::SynthConfig::default()
    })
    .unwrap();
    s.write(dir.path()).unwrap();
    (dir, s)
}

#[test]
fn malformed_script_is_excluded_and_reported() {
    let (dir, _) = corpus_dir(9);
    // no scene, no dialogue: fails the quality filter
    fs::write(dir.path().join("scripts/broken.txt"), "\n\n   \n").unwrap();
    let c = corpus::ingest(&config(dir.path(), 0)).unwrap();
    assert_eq!(c.scripts.len(), 9);
    assert_eq!(c.excluded.len(), 1);
    assert_eq!(c.excluded[0].title, "broken");
    let manifest = c.manifest(&config(dir.path(), 0));
    assert_eq!(manifest.excluded, c.excluded);
}

#[test]
fn ingestion_ignores_file_creation_order() {
    let (a, s) = corpus_dir(12);
    let b = tempfile::tempdir().unwrap();
    fs::create_dir_all(b.path().join("scripts")).unwrap();
    for name in ["tags.json", "embeddings.txt"] {
        fs::copy(a.path().join(name), b.path().join(name)).unwrap();
    }
    for (title, text) in s.scripts.iter().rev() {
        fs::write(b.path().join(format!("scripts/{title}.txt")), text).unwrap();
    }
    let ca = corpus::ingest(&config(a.path(), 3)).unwrap();
    let cb = corpus::ingest(&config(b.path(), 3)).unwrap();
    let strip = |m: corpus::CorpusManifest| (m.vocab_hash, m.scripts);
    assert_eq!(strip(ca.manifest(&config(a.path(), 3))), strip(cb.manifest(&config(b.path(), 3))));
    let titles: Vec<&str> = ca.scripts.iter().map(|s| s.title()).collect();
    let mut sorted = titles.clone();
    sorted.sort_unstable();
    assert_eq!(titles, sorted);
}

#[test]
fn splits_depend_only_on_the_seed() {
    let (dir, _) = corpus_dir(20);
    let splits = |seed| -> Vec<Split> { corpus::ingest(&config(dir.path(), seed)).unwrap().scripts.iter().map(|s| s.split).collect() };
    assert_eq!(splits(7), splits(7));
    assert_ne!(splits(7), splits(8));
    let s = splits(7);
    assert_eq!(s.iter().filter(|&&x| x == Split::Heldout).count(), 4);
}

#[test]
fn rare_tokens_become_unknown() {
    let (dir, _) = corpus_dir(6);
    let c = corpus::ingest(&config(dir.path(), 0)).unwrap();
    let mut counts = std::collections::BTreeMap::<String, u64>::new();
    for s in &c.scripts {
        for scene in &s.screenplay.scenes {
            for st in &scene.statements {
                for t in corpus::tokenize(st.text()) {
                    *counts.entry(t).or_default() += 1;
                }
            }
        }
    }
    assert!(counts.values().any(|&n| n < 5));
    for (tok, n) in counts {
        let id = c.vocab.id(&tok);
        assert_eq!(id == UNK_ID, n < 5, "{tok} seen {n} times");
    }
}

#[test]
fn synthetic_statistics_fall_in_configured_ranges() {
    let cfg = synth::SynthConfig::default();
    let s = synth::generate(&cfg).unwrap();
    assert_eq!(s.scripts.len(), cfg.scripts);
    let mut scene_counts = Vec::new();
    let mut statement_counts = Vec::new();
    for (title, text) in &s.scripts {
        let sp = parse_text(title, text, &ParserConfig::default()).unwrap().screenplay;
        scene_counts.push(sp.scenes.len());
        statement_counts.extend(sp.scenes.iter().map(|sc| sc.len()));
        assert_eq!(s.truth.scene_topics[title].len(), sp.scenes.len());
    }
    assert!(scene_counts.iter().all(|n| (cfg.scenes.0..=cfg.scenes.1).contains(n)));
    assert!(statement_counts.iter().all(|n| (cfg.statements.0..=cfg.statements.1).contains(n)));
    // the ranges are actually exercised
    assert!(scene_counts.contains(&cfg.scenes.0) && scene_counts.contains(&cfg.scenes.1));
}
