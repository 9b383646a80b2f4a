//! Synthetic screenplay corpora with planted tag signals and topics.
//!
//! Each tag `j` owns a marker pair `sigja`/`sigjb`. A script positive for
//! `j` has, in each scene with probability `signal`, an action statement
//! containing the pair in that order. With `order_sensitive`, scripts
//! negative for `j` get the reversed pair instead, so only models that
//! read word order can separate them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_atomic, TagFile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub scripts: usize,
    pub tags: usize,
    pub signal: f64,
    pub seed: u64,
    pub order_sensitive: bool,
    /// Inclusive ranges.
    pub scenes: (usize, usize),
    pub statements: (usize, usize),
    pub words: (usize, usize),
    pub topics: usize,
    pub topic_words: usize,
    pub filler_words: usize,
    pub characters: usize,
    pub dim: usize,
    pub tag_dim: usize,
    pub positive_rate: f64,
    /// Norm of marker embeddings; other words are unit length.
    pub marker_norm: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scripts: 40,
            tags: 3,
            signal: 0.8,
            seed: 0,
            order_sensitive: true,
            scenes: (6, 9),
            statements: (3, 6),
            words: (5, 9),
            topics: 3,
            topic_words: 12,
            filler_words: 120,
            characters: 8,
            dim: 100,
            tag_dim: 16,
            positive_rate: 0.5,
            marker_norm: 4.0,
        }
    }
}

const TAG_NAMES: [&str; 8] = ["crime", "heist", "romance", "comedy", "horror", "western", "drama", "war"];
const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ren", "tu", "sa", "vo", "ne", "di", "po", "gal", "bri", "zu", "fen", "mor", "ta", "li", "dro",
    "pe", "su", "nar", "vi", "qua", "he",
];
const PLACES: [&str; 6] = ["KITCHEN", "STREET", "DINER", "OFFICE", "WAREHOUSE", "APARTMENT"];

/// What was planted, for checking recoveries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub attribute: String,
    pub tags: Vec<String>,
    /// Marker pair per tag, in planted order.
    pub markers: Vec<(String, String)>,
    pub topics: Vec<Vec<String>>,
    /// Planted topic of every scene, per script.
    pub scene_topics: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    /// `(title, screenplay text)` in title order.
    pub scripts: Vec<(String, String)>,
    pub tags: TagFile,
    pub loglines: BTreeMap<String, String>,
    pub embeddings: BTreeMap<String, Vec<f64>>,
    pub tag_embeddings: Vec<(String, Vec<f64>)>,
    pub truth: GroundTruth,
}

fn word_pool(n: usize, rng: &mut ChaCha8Rng, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.gen_range(2..=3);
        let w: String = (0..len).map(|_| *SYLLABLES.choose(rng).expect("syllables")).collect();
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    // Box-Muller; good enough for planting directions
    let v: Vec<f64> = (0..dim)
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn sentence(words: &[String]) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        s.replace_range(..1, &first.to_uppercase());
    }
    s.push('.');
    s
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.tags < 2 {
        return Err(Error::Config("synthetic corpus needs at least 2 tags".into()));
    }
    for (name, (lo, hi)) in [("scenes", cfg.scenes), ("statements", cfg.statements), ("words", cfg.words)] {
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("bad {name} range {lo}..={hi}")));
        }
    }
    if cfg.statements.0 < 2 || cfg.words.0 < 4 {
        return Err(Error::Config("need at least 2 statements per scene and 4 words per statement".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tags: Vec<String> = (0..cfg.tags)
        .map(|j| TAG_NAMES.get(j).map_or_else(|| format!("tag{j}"), |s| s.to_string()))
        .collect();
    let markers: Vec<(String, String)> = (0..cfg.tags).map(|j| (format!("sig{j}a"), format!("sig{j}b"))).collect();
    let mut taken: BTreeSet<String> = markers.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let filler = word_pool(cfg.filler_words, &mut rng, &mut taken);
    let topics: Vec<Vec<String>> = (0..cfg.topics)
        .map(|_| word_pool(cfg.topic_words, &mut rng, &mut taken))
        .collect();
    let names: Vec<String> = word_pool(cfg.characters, &mut rng, &mut taken)
        .into_iter()
        .map(|n| n.to_uppercase())
        .collect();

    // embeddings
    let mut embeddings = BTreeMap::new();
    for w in &filler {
        embeddings.insert(w.clone(), gaussian_unit(&mut rng, cfg.dim));
    }
    for words in &topics {
        let center = gaussian_unit(&mut rng, cfg.dim);
        for w in words {
            let noise = gaussian_unit(&mut rng, cfg.dim);
            let v: Vec<f64> = center.iter().zip(&noise).map(|(c, n)| c + 0.35 * n).collect();
            embeddings.insert(w.clone(), v);
        }
    }
    for (a, b) in &markers {
        for w in [a, b] {
            let v = gaussian_unit(&mut rng, cfg.dim).into_iter().map(|x| x * cfg.marker_norm).collect();
            embeddings.insert(w.clone(), v);
        }
    }
    let tag_embeddings = tags.iter().map(|t| (t.clone(), gaussian_unit(&mut rng, cfg.tag_dim))).collect();

    let mut labels: Vec<Vec<bool>> = (0..cfg.scripts)
        .map(|_| (0..cfg.tags).map(|_| rng.gen_bool(cfg.positive_rate)).collect())
        .collect();
    // every tag needs positives and negatives
    for j in 0..cfg.tags {
        if cfg.scripts >= 2 {
            labels[(2 * j) % cfg.scripts][j] = true;
            labels[(2 * j + 1) % cfg.scripts][j] = false;
        }
    }

    let mut scripts = Vec::new();
    let mut tag_file = TagFile::new();
    let mut loglines = BTreeMap::new();
    let mut scene_topics = BTreeMap::new();
    let pick = |rng: &mut ChaCha8Rng, pool: &[String], n: usize| -> Vec<String> {
        (0..n).map(|_| pool.choose(rng).expect("pool").clone()).collect()
    };
    for (i, label) in labels.iter().enumerate() {
        let title = format!("script{i:03}");
        let mut text = format!("{}\n\n", title.to_uppercase());
        let n_scenes = rng.gen_range(cfg.scenes.0..=cfg.scenes.1);
        let mut topics_here = Vec::with_capacity(n_scenes);
        for s in 0..n_scenes {
            let topic = rng.gen_range(0..cfg.topics.max(1));
            topics_here.push(topic);
            let place = PLACES.choose(&mut rng).expect("places");
            let time = if rng.gen_bool(0.5) { "DAY" } else { "NIGHT" };
            let _ = writeln!(text, "{} {place} - {time}\n", if s % 2 == 0 { "INT." } else { "EXT." });
            let n_st = rng.gen_range(cfg.statements.0..=cfg.statements.1);
            // statement 0 is action and 1 is dialogue; the rest are mixed
            let kinds: Vec<bool> = (0..n_st).map(|k| if k < 2 { k == 1 } else { rng.gen_bool(0.5) }).collect();
            let action_slots: Vec<usize> = (0..n_st).filter(|&k| !kinds[k]).collect();
            let mut planted: BTreeMap<usize, Vec<(String, String)>> = BTreeMap::new();
            for (j, &pos) in label.iter().enumerate() {
                let pair = if pos {
                    Some(markers[j].clone())
                } else if cfg.order_sensitive {
                    Some((markers[j].1.clone(), markers[j].0.clone()))
                } else {
                    None
                };
                if let Some(pair) = pair {
                    if rng.gen_bool(cfg.signal) {
                        let slot = *action_slots.choose(&mut rng).expect("one action statement");
                        planted.entry(slot).or_default().push(pair);
                    }
                }
            }
            let speakers: Vec<&String> = names.choose_multiple(&mut rng, 2).collect();
            let mut turn = 0;
            for (k, &dialogue) in kinds.iter().enumerate() {
                let n_words = rng.gen_range(cfg.words.0..=cfg.words.1);
                let mut words: Vec<String> = (0..n_words)
                    .map(|_| {
                        if cfg.topics > 0 && rng.gen_bool(if dialogue { 0.3 } else { 0.5 }) {
                            topics[topic].choose(&mut rng).expect("topic").clone()
                        } else {
                            filler.choose(&mut rng).expect("filler").clone()
                        }
                    })
                    .collect();
                for (a, b) in planted.remove(&k).unwrap_or_default() {
                    let at = rng.gen_range(0..=words.len());
                    words.insert(at, b);
                    words.insert(at, a);
                }
                if dialogue {
                    let speaker = speakers[turn % speakers.len()];
                    turn += 1;
                    let _ = writeln!(text, "{:20}{speaker}", "");
                    if rng.gen_bool(0.15) {
                        let _ = writeln!(text, "{:15}(quietly)", "");
                    }
                    let _ = writeln!(text, "{:10}{}\n", "", sentence(&words));
                } else {
                    let _ = writeln!(text, "{}\n", sentence(&words));
                }
            }
        }
        text.push_str("THE END\n");
        let positives: Vec<String> = (0..cfg.tags).filter(|&j| label[j]).map(|j| tags[j].clone()).collect();
        let mut logline = pick(&mut rng, &filler, 4);
        for j in (0..cfg.tags).filter(|&j| label[j]) {
            logline.push(markers[j].0.clone());
            logline.push(markers[j].1.clone());
        }
        loglines.insert(title.clone(), sentence(&logline));
        tag_file.insert(title.clone(), BTreeMap::from([("genre".to_string(), positives)]));
        scene_topics.insert(title.clone(), topics_here);
        scripts.push((title, text));
    }
    Ok(SynthCorpus {
        config: cfg.clone(),
        scripts,
        tags: tag_file,
        loglines,
        embeddings,
        tag_embeddings,
        truth: GroundTruth {
            attribute: "genre".into(),
            tags,
            markers,
            topics,
            scene_topics,
        },
    })
}

fn fmt_vec(out: &mut String, v: &[f64]) {
    for x in v {
        let _ = write!(out, " {x:.6}");
    }
}

impl SynthCorpus {
    pub fn embeddings_text(&self) -> String {
        let mut out = format!("{} {}\n", self.embeddings.len(), self.config.dim);
        for (w, v) in &self.embeddings {
            out.push_str(w);
            fmt_vec(&mut out, v);
            out.push('\n');
        }
        out
    }

    pub fn tag_embeddings_text(&self) -> String {
        let mut out = String::new();
        for (t, v) in &self.tag_embeddings {
            let _ = write!(out, "{}\t{t}\t", self.truth.attribute);
            let mut vals = String::new();
            fmt_vec(&mut vals, v);
            out.push_str(vals.trim_start());
            out.push('\n');
        }
        out
    }

    /// Write `scripts/*.txt`, `tags.json`, `loglines.json`,
    /// `embeddings.txt`, `tag_embeddings.tsv` and `ground_truth.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (title, text) in &self.scripts {
            write_atomic(&dir.join("scripts").join(format!("{title}.txt")), text.as_bytes())?;
        }
        write_atomic(&dir.join("tags.json"), serde_json::to_string_pretty(&self.tags)?.as_bytes())?;
        write_atomic(&dir.join("loglines.json"), serde_json::to_string_pretty(&self.loglines)?.as_bytes())?;
        write_atomic(&dir.join("embeddings.txt"), self.embeddings_text().as_bytes())?;
        write_atomic(&dir.join("tag_embeddings.tsv"), self.tag_embeddings_text().as_bytes())?;
        write_atomic(&dir.join("ground_truth.json"), serde_json::to_string_pretty(&self.truth)?.as_bytes())?;
        write_atomic(&dir.join("synth_config.json"), serde_json::to_string_pretty(&self.config)?.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_text, ParserConfig, StatementKind};

    #[test]
    fn full_signal_marks_every_scene() {
        let cfg = SynthConfig {
            scripts: 6,
            signal: 1.0,
            ..SynthConfig::default()
        };
        let c = generate(&cfg).unwrap();
        for (title, text) in &c.scripts {
            let p = parse_text(title, text, &ParserConfig::default()).unwrap();
            let tags = &c.tags[title]["genre"];
            for (j, tag) in c.truth.tags.iter().enumerate() {
                if !tags.contains(tag) {
                    continue;
                }
                for scene in &p.screenplay.scenes {
                    assert!(scene
                        .action_statements()
                        .any(|s| crate::corpus::tokenize(s).contains(&c.truth.markers[j].0)));
                }
            }
            assert!(p.lines.iter().all(|l| l.kind != StatementKind::Other));
        }
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = SynthConfig {
            scripts: 3,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap().scripts, generate(&cfg).unwrap().scripts);
        assert!(generate(&SynthConfig { tags: 1, ..cfg }).is_err());
    }
}
