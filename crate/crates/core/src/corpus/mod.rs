//! Corpus ingestion: tokenization, vocabularies, pretrained embeddings,
//! tag files, dataset splits and model inputs.

pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{LabelMatrix, TrainConfig};
use crate::descriptor::DescriptorConfig;
use crate::encoders::{
    AttentionMode, Channel, EmbeddingTable, EncoderKind, ModelConfig, SceneInput, ScriptInput, StatementInput, Variant,
};
use crate::error::{Error, Result};
use crate::parser::{self, ParserConfig, Screenplay, Statement};

pub const UNK: &str = "<unk>";
pub const UNK_ID: u32 = 0;
pub const WORD_DIM: usize = 100;

/// Lowercased word tokens; apostrophes inside words are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Write `bytes` to a sibling temp file and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Token ↔ id map; id 0 is the unknown token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    pub min_count: u64,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Keep tokens seen at least `min_count` times, most frequent first,
    /// ties in lexicographic order.
    pub fn build(counts: &BTreeMap<String, u64>, min_count: u64) -> Self {
        let mut kept: Vec<(&String, u64)> = counts
            .iter()
            .filter(|(t, &c)| c >= min_count && t.as_str() != UNK)
            .map(|(t, &c)| (t, c))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let unk_count = counts
            .iter()
            .filter(|(_, &c)| c < min_count)
            .map(|(_, &c)| c)
            .sum();
        let mut tokens = vec![UNK.to_string()];
        let mut cs = vec![unk_count];
        for (t, c) in kept {
            tokens.push(t.clone());
            cs.push(c);
        }
        Self::from_parts(tokens, cs, min_count)
    }

    fn from_parts(tokens: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self {
            tokens,
            counts,
            min_count,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// SHA-256 over the ordered token list.
    pub fn hash(&self) -> String {
        sha256_hex(self.tokens.join("\n").as_bytes())
    }

    /// `token<TAB>count` per line, in id order.
    pub fn to_text(&self) -> String {
        self.tokens
            .iter()
            .zip(&self.counts)
            .map(|(t, c)| format!("{t}\t{c}\n"))
            .collect()
    }

    pub fn from_text(text: &str, min_count: u64) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let (t, c) = line.rsplit_once('\t').ok_or_else(|| Error::Parse {
                source_name: "vocabulary".into(),
                line: i + 1,
                message: "expected token<TAB>count".into(),
            })?;
            tokens.push(t.to_string());
            counts.push(c.parse().map_err(|_| Error::Parse {
                source_name: "vocabulary".into(),
                line: i + 1,
                message: format!("bad count {c:?}"),
            })?);
        }
        if tokens.first().map(String::as_str) != Some(UNK) {
            return Err(Error::Checkpoint("vocabulary must start with the unknown token".into()));
        }
        Ok(Self::from_parts(tokens, counts, min_count))
    }
}

/// Load text embeddings (`token v1 … vd` per line, optional
/// `count dim` header) for every vocabulary entry. Tokens without a
/// vector, and the unknown token, get zeros.
pub fn read_embeddings(path: &Path, vocab: &Vocabulary, dim: usize) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, vocab, dim, &path.display().to_string())
}

pub fn parse_embeddings(text: &str, vocab: &Vocabulary, dim: usize, source_name: &str) -> Result<EmbeddingTable> {
    let mut data = vec![0.0; vocab.len() * dim];
    let mut found = 0usize;
    for (no, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if no == 0 && values.len() == 1 && token.parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(Error::EmbeddingDimMismatch {
                expected: dim,
                found: values.len(),
                context: format!("{source_name} line {}", no + 1),
            });
        }
        let Some(id) = vocab.get(token).filter(|&id| id != UNK_ID) else {
            continue;
        };
        let row = &mut data[id as usize * dim..(id as usize + 1) * dim];
        for (slot, v) in row.iter_mut().zip(&values) {
            *slot = v.parse().map_err(|_| Error::Parse {
                source_name: source_name.to_string(),
                line: no + 1,
                message: format!("bad float {v:?}"),
            })?;
        }
        found += 1;
    }
    let missing = vocab.len() - 1 - found;
    if missing > 0 {
        warn!("{missing} vocabulary tokens have no pretrained vector; using zeros");
    }
    EmbeddingTable::new(dim, data)
}

/// Script title → attribute → tag values.
pub type TagFile = BTreeMap<String, BTreeMap<String, Vec<String>>>;

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Heldout,
}

/// Seeded assignment of `n` items (already in a canonical order) to
/// heldout, validation (a fraction of the remainder) and train.
pub fn assign_splits(n: usize, heldout_fraction: f64, validation_fraction: f64, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_held = ((n as f64) * heldout_fraction).round() as usize;
    let n_val = (((n - n_held) as f64) * validation_fraction).round() as usize;
    let mut out = vec![Split::Train; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_held {
            Split::Heldout
        } else if rank < n_held + n_val {
            Split::Validation
        } else {
            Split::Train
        };
    }
    out
}

/// Everything a run is parameterized by; embedded in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub encoder: EncoderKind,
    pub variant: Variant,
    /// Train the logline baseline instead of a screenplay encoder.
    pub loglines_baseline: bool,
    pub characters: bool,
    pub attention: AttentionMode,
    pub attribute: String,
    pub scripts: PathBuf,
    pub tags: PathBuf,
    pub embeddings: PathBuf,
    pub tag_embeddings: Option<PathBuf>,
    pub loglines: Option<PathBuf>,
    pub word_dim: usize,
    pub hidden_per_direction: usize,
    pub char_dim: usize,
    pub min_count: u64,
    pub scene_cap: usize,
    pub heldout_fraction: f64,
    pub validation_fraction: f64,
    pub parser: ParserConfig,
    pub train: TrainConfig,
    pub descriptor: DescriptorConfig,
    pub descriptor_min_docs: u64,
    pub descriptor_exclude_top: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            encoder: EncoderKind::GruAttn,
            variant: Variant::Full,
            loglines_baseline: false,
            characters: false,
            attention: AttentionMode::Softmax,
            attribute: "genre".into(),
            scripts: PathBuf::from("scripts"),
            tags: PathBuf::from("tags.json"),
            embeddings: PathBuf::from("embeddings.txt"),
            tag_embeddings: None,
            loglines: None,
            word_dim: WORD_DIM,
            hidden_per_direction: 50,
            char_dim: 10,
            min_count: 5,
            scene_cap: parser::DEFAULT_SCENE_CAP,
            heldout_fraction: 0.2,
            validation_fraction: 0.1,
            parser: ParserConfig::default(),
            train: TrainConfig::default(),
            descriptor: DescriptorConfig::default(),
            descriptor_min_docs: 50,
            descriptor_exclude_top: 500,
        }
    }
}

impl RunConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            characters: self.characters,
            word_dim: self.word_dim,
            hidden_per_direction: self.hidden_per_direction,
            char_dim: self.char_dim,
            attention: self.attention,
            ..ModelConfig::new(self.encoder, self.variant)
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScript {
    pub screenplay: Screenplay,
    pub tags: BTreeMap<String, Vec<String>>,
    pub logline: Option<String>,
    pub split: Split,
}

impl CorpusScript {
    pub fn title(&self) -> &str {
        &self.screenplay.title
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub title: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    /// Sorted by title.
    pub scripts: Vec<CorpusScript>,
    pub vocab: Vocabulary,
    pub characters: Vocabulary,
    pub embeddings: EmbeddingTable,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub title: String,
    pub split: Split,
    pub scenes: usize,
    pub statements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub config_hash: String,
    pub vocab_hash: String,
    pub vocab_size: usize,
    pub scripts: Vec<ManifestEntry>,
    pub excluded: Vec<Exclusion>,
}

/// Reason a parsed script fails the quality filter, if any.
pub fn quality_failure(sp: &Screenplay) -> Option<&'static str> {
    if sp.scenes.is_empty() || sp.statement_count() == 0 {
        Some("no_statements")
    } else if sp.dialogue_count() == 0 {
        Some("no_dialogue")
    } else if sp.action_count() == 0 {
        Some("no_action")
    } else {
        None
    }
}

fn statement_tokens(s: &Statement) -> Vec<String> {
    tokenize(s.text())
}

/// Parse, filter, split and index a script directory (`*.txt`, title =
/// file stem).
pub fn ingest(cfg: &RunConfig) -> Result<Corpus> {
    let mut files: Vec<PathBuf> = fs::read_dir(&cfg.scripts)
        .map_err(|e| Error::io(&cfg.scripts, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    let tags: TagFile = read_json(&cfg.tags)?;
    let loglines: BTreeMap<String, String> = match &cfg.loglines {
        Some(p) => read_json(p)?,
        None => BTreeMap::new(),
    };
    let parsed: Vec<(String, Result<Screenplay>)> = files
        .par_iter()
        .map(|path| {
            let title = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let result = fs::read_to_string(path)
                .map_err(|e| Error::io(path, e))
                .and_then(|text| parser::parse_text(&title, &text, &cfg.parser))
                .map(|p| parser::split_long_scenes(&p.screenplay, cfg.scene_cap));
            (title, result)
        })
        .collect();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (title, result) in parsed {
        let sp = match result {
            Ok(sp) => sp,
            Err(e @ (Error::EmptyScript | Error::Parse { .. })) => {
                warn!("{title}: excluded ({e})");
                excluded.push(Exclusion {
                    title,
                    reason: e.kind().to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(reason) = quality_failure(&sp) {
            warn!("{title}: excluded ({reason})");
            excluded.push(Exclusion {
                title,
                reason: reason.into(),
            });
            continue;
        }
        let Some(t) = tags.get(&title) else {
            warn!("{title}: {}", Error::MissingTags(title.clone()));
            excluded.push(Exclusion {
                title,
                reason: "missing_tags".into(),
            });
            continue;
        };
        kept.push((sp, t.clone(), loglines.get(&title).cloned()));
    }
    kept.sort_by(|a, b| a.0.title.cmp(&b.0.title));
    let splits = assign_splits(kept.len(), cfg.heldout_fraction, cfg.validation_fraction, cfg.seed);

    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut char_counts: BTreeMap<String, u64> = BTreeMap::new();
    for (sp, _, logline) in &kept {
        for scene in &sp.scenes {
            for st in &scene.statements {
                for tok in statement_tokens(st) {
                    *counts.entry(tok).or_default() += 1;
                }
                if let Statement::Dialogue { character, .. } = st {
                    *char_counts.entry(character.clone()).or_default() += 1;
                }
            }
        }
        for tok in logline.iter().flat_map(|l| tokenize(l)) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let vocab = Vocabulary::build(&counts, cfg.min_count);
    let characters = Vocabulary::build(&char_counts, 1);
    let embeddings = read_embeddings(&cfg.embeddings, &vocab, cfg.word_dim)?;
    info!(
        "ingested {} scripts ({} excluded), vocabulary {}",
        kept.len(),
        excluded.len(),
        vocab.len()
    );
    let scripts = kept
        .into_iter()
        .zip(splits)
        .map(|((screenplay, tags, logline), split)| CorpusScript {
            screenplay,
            tags,
            logline,
            split,
        })
        .collect();
    Ok(Corpus {
        scripts,
        vocab,
        characters,
        embeddings,
        excluded,
    })
}

impl Corpus {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.scripts.len()).filter(|&i| self.scripts[i].split == split).collect()
    }

    pub fn manifest(&self, cfg: &RunConfig) -> CorpusManifest {
        CorpusManifest {
            seed: cfg.seed,
            config_hash: cfg.hash(),
            vocab_hash: self.vocab.hash(),
            vocab_size: self.vocab.len(),
            scripts: self
                .scripts
                .iter()
                .map(|s| ManifestEntry {
                    title: s.title().to_string(),
                    split: s.split,
                    scenes: s.screenplay.scenes.len(),
                    statements: s.screenplay.statement_count(),
                })
                .collect(),
            excluded: self.excluded.clone(),
        }
    }

    pub fn token_ids(&self, text: &str) -> Vec<u32> {
        tokenize(text).iter().map(|t| self.vocab.id(t)).collect()
    }

    /// Model input for one script. Statements without tokens are dropped.
    pub fn script_input(&self, i: usize) -> ScriptInput {
        let sp = &self.scripts[i].screenplay;
        let scenes = sp
            .scenes
            .iter()
            .map(|scene| {
                let statements = scene
                    .statements
                    .iter()
                    .filter_map(|st| {
                        let tokens = self.token_ids(st.text());
                        if tokens.is_empty() {
                            return None;
                        }
                        let (channel, character) = match st {
                            Statement::Action(_) => (Channel::Action, None),
                            Statement::Dialogue { character, .. } => {
                                (Channel::Dialogue, Some(self.characters.id(character)))
                            }
                        };
                        Some(StatementInput {
                            channel,
                            tokens,
                            character,
                        })
                    })
                    .collect();
                let characters = scene.characters().iter().map(|c| self.characters.id(c)).collect();
                SceneInput {
                    statements,
                    characters,
                }
            })
            .collect();
        ScriptInput {
            title: sp.title.clone(),
            scenes,
        }
    }

    /// Sorted distinct tag values of an attribute across the corpus.
    pub fn tag_values(&self, attribute: &str) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .scripts
            .iter()
            .flat_map(|s| s.tags.get(attribute).into_iter().flatten())
            .collect();
        set.into_iter().cloned().collect()
    }

    pub fn labels(&self, indices: &[usize], attribute: &str, tags: &[String]) -> LabelMatrix {
        let mut m = LabelMatrix::zeros(indices.len(), tags.len());
        for (r, &i) in indices.iter().enumerate() {
            if let Some(vals) = self.scripts[i].tags.get(attribute) {
                for (j, t) in tags.iter().enumerate() {
                    if vals.contains(t) {
                        m.set(r, j, true);
                    }
                }
            }
        }
        m
    }

    /// Per-token total counts and number of scripts containing each token.
    pub fn token_statistics(&self) -> (Vec<u64>, Vec<u64>) {
        let mut doc_freq = vec![0u64; self.vocab.len()];
        for s in &self.scripts {
            let seen: BTreeSet<u32> = s
                .screenplay
                .scenes
                .iter()
                .flat_map(|sc| sc.statements.iter())
                .flat_map(|st| self.token_ids(st.text()))
                .collect();
            for id in seen {
                doc_freq[id as usize] += 1;
            }
        }
        (self.vocab.counts().to_vec(), doc_freq)
    }

    /// Each scene as a set of tokens, for co-occurrence statistics.
    pub fn scene_documents(&self) -> Vec<BTreeSet<String>> {
        self.scripts
            .iter()
            .flat_map(|s| s.screenplay.scenes.iter())
            .map(|sc| sc.statements.iter().flat_map(statement_tokens).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_lowercases_and_keeps_contractions() {
        assert_eq!(tokenize("What's her NAME? -- Mia."), vec!["what's", "her", "name", "mia"]);
    }

    #[test]
    fn rare_tokens_map_to_unk() {
        let counts: BTreeMap<String, u64> = [("a", 7), ("b", 5), ("c", 4)].iter().map(|(t, c)| (t.to_string(), *c)).collect();
        let v = Vocabulary::build(&counts, 5);
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("c"), UNK_ID);
        assert_eq!(v.counts()[0], 4);
        let back = Vocabulary::from_text(&v.to_text(), 5).unwrap();
        assert_eq!(back.hash(), v.hash());
        assert_eq!(back.id("b"), 2);
    }

    #[test]
    fn splits_are_seeded_and_sized() {
        let a = assign_splits(40, 0.25, 0.1, 7);
        assert_eq!(a, assign_splits(40, 0.25, 0.1, 7));
        assert_eq!(a.iter().filter(|&&s| s == Split::Heldout).count(), 10);
        assert_eq!(a.iter().filter(|&&s| s == Split::Validation).count(), 3);
    }

    #[test]
    fn embedding_dimension_is_checked() {
        let counts: BTreeMap<String, u64> = [("x".to_string(), 9)].into_iter().collect();
        let v = Vocabulary::build(&counts, 1);
        let t = parse_embeddings("2 3\nx 1 2 3\ny 0 0 0\n", &v, 3, "e").unwrap();
        assert_eq!(t.vector(1), &[1.0, 2.0, 3.0]);
        assert_eq!(t.vector(0), &[0.0; 3]);
        assert!(matches!(
            parse_embeddings("x 1 2\n", &v, 3, "e"),
            Err(Error::EmbeddingDimMismatch { expected: 3, found: 2, .. })
        ));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
