//! End-to-end steps shared by the command line and the test suites.

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::{ClassifierHead, LabelMatrix, LoglineEncoder, TagTaxonomy, Tagger, TrainOutcome};
use crate::corpus::{Corpus, RunConfig, Split};
use crate::descriptor::{
    descriptor_vocab, init_descriptors, nearest_words, semantic_coherence, train_descriptors, Cooccurrence,
    DescriptorData, DescriptorLog, DescriptorModel, ReconstructionTarget,
};
use crate::encoders::{DocumentEncoder, HierarchicalModel, ScriptInput};
use crate::error::{Error, Result};
use crate::tensor::ParamStore;

/// A tag model with its parameters.
#[derive(Debug, Clone)]
pub struct TaggerModel<E> {
    pub encoder: E,
    pub head: ClassifierHead,
    pub store: ParamStore,
    pub taxonomy: TagTaxonomy,
}

impl<E: DocumentEncoder + Sync> TaggerModel<E>
where
    E::Input: Sync,
{
    pub fn logits(&self, corpus: &Corpus, input: &E::Input) -> Result<Vec<f64>> {
        Tagger {
            encoder: &self.encoder,
            head: &self.head,
            embeddings: &corpus.embeddings,
        }
        .logits(&self.store, input)
    }

    /// Thresholded predictions, one row per input.
    pub fn predict(&self, corpus: &Corpus, inputs: &[E::Input], threshold: f64) -> Result<LabelMatrix> {
        let rows = inputs
            .par_iter()
            .map(|x| Ok(crate::classifier::predict_tags(&self.logits(corpus, x)?, threshold)))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Ok(LabelMatrix::zeros(0, self.taxonomy.len()));
        }
        LabelMatrix::from_rows(&rows)
    }
}

pub type HierarchicalTagger = TaggerModel<HierarchicalModel>;
pub type LoglineTagger = TaggerModel<LoglineEncoder>;

fn labelled<I: Clone>(corpus: &Corpus, idx: &[usize], inputs: &[I], attribute: &str, tags: &[String]) -> Vec<(I, Vec<u8>)> {
    let y = corpus.labels(idx, attribute, tags);
    inputs.iter().enumerate().map(|(r, x)| (x.clone(), y.row(r).to_vec())).collect()
}

pub fn taxonomy(corpus: &Corpus, attribute: &str) -> Result<TagTaxonomy> {
    let tags = corpus.tag_values(attribute);
    if tags.is_empty() {
        return Err(Error::MissingTags(format!("no script has tags for attribute {attribute:?}")));
    }
    let train = corpus.indices(Split::Train);
    if train.is_empty() {
        return Err(Error::DataEmpty);
    }
    Ok(TagTaxonomy::from_labels(attribute, tags.clone(), &corpus.labels(&train, attribute, &tags)))
}

pub fn build_hierarchical(cfg: &RunConfig, corpus: &Corpus, taxonomy: TagTaxonomy) -> Result<HierarchicalTagger> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    let encoder = HierarchicalModel::build(cfg.model_config(), corpus.characters.len(), &mut store, &mut rng)?;
    let head = ClassifierHead::new(&mut store, encoder.output_dim(), taxonomy.len(), &mut rng);
    Ok(TaggerModel {
        encoder,
        head,
        store,
        taxonomy,
    })
}

pub fn build_logline(cfg: &RunConfig, taxonomy: TagTaxonomy) -> LoglineTagger {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    let encoder = LoglineEncoder::new(&mut store, cfg.word_dim, cfg.hidden_per_direction, &mut rng);
    let head = ClassifierHead::new(&mut store, encoder.output_dim(), taxonomy.len(), &mut rng);
    TaggerModel {
        encoder,
        head,
        store,
        taxonomy,
    }
}

pub fn script_inputs(corpus: &Corpus, idx: &[usize]) -> Vec<ScriptInput> {
    idx.iter().map(|&i| corpus.script_input(i)).collect()
}

/// Logline token ids for scripts that have one; others are skipped with
/// a warning. Returns the kept corpus indices too.
pub fn logline_inputs(corpus: &Corpus, idx: &[usize]) -> (Vec<usize>, Vec<Vec<u32>>) {
    let mut kept = Vec::new();
    let mut inputs = Vec::new();
    for &i in idx {
        let s = &corpus.scripts[i];
        match s.logline.as_deref().map(|l| corpus.token_ids(l)).filter(|t| !t.is_empty()) {
            Some(t) => {
                kept.push(i);
                inputs.push(t);
            }
            None => warn!("{}: {}", s.title(), Error::MissingLogline(s.title().to_string())),
        }
    }
    (kept, inputs)
}

/// Train a hierarchical tagger on the train split, selecting on the
/// validation split.
pub fn train_hierarchical(cfg: &RunConfig, corpus: &Corpus) -> Result<(HierarchicalTagger, TrainOutcome)> {
    let tax = taxonomy(corpus, &cfg.attribute)?;
    let mut model = build_hierarchical(cfg, corpus, tax)?;
    let (train_idx, val_idx) = (corpus.indices(Split::Train), corpus.indices(Split::Validation));
    let train = labelled(corpus, &train_idx, &script_inputs(corpus, &train_idx), &cfg.attribute, &model.taxonomy.tags);
    let val = labelled(corpus, &val_idx, &script_inputs(corpus, &val_idx), &cfg.attribute, &model.taxonomy.tags);
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.seed;
    info!(
        "training {} / {} on {} scripts ({} validation)",
        cfg.encoder.name(),
        cfg.variant.name(),
        train.len(),
        val.len()
    );
    let outcome = Tagger {
        encoder: &model.encoder,
        head: &model.head,
        embeddings: &corpus.embeddings,
    }
    .train(&mut model.store, &train, &val, &model.taxonomy, &train_cfg)?;
    Ok((model, outcome))
}

pub fn train_logline(cfg: &RunConfig, corpus: &Corpus) -> Result<(LoglineTagger, TrainOutcome)> {
    let tax = taxonomy(corpus, &cfg.attribute)?;
    let mut model = build_logline(cfg, tax);
    let (train_idx, train_in) = logline_inputs(corpus, &corpus.indices(Split::Train));
    let (val_idx, val_in) = logline_inputs(corpus, &corpus.indices(Split::Validation));
    let train = labelled(corpus, &train_idx, &train_in, &cfg.attribute, &model.taxonomy.tags);
    let val = labelled(corpus, &val_idx, &val_in, &cfg.attribute, &model.taxonomy.tags);
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.seed;
    let outcome = Tagger {
        encoder: &model.encoder,
        head: &model.head,
        embeddings: &corpus.embeddings,
    }
    .train(&mut model.store, &train, &val, &model.taxonomy, &train_cfg)?;
    Ok((model, outcome))
}

/// Descriptor report entry.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DescriptorSummary {
    pub index: usize,
    pub top_words: Vec<String>,
    pub coherence: f64,
}

/// Everything produced by a descriptor run.
#[derive(Debug, Clone)]
pub struct DescriptorRun {
    pub model: DescriptorModel,
    pub store: ParamStore,
    pub target: ReconstructionTarget,
    pub data: Vec<DescriptorData>,
    pub log: DescriptorLog,
    pub vocab_ids: Vec<u32>,
    pub initial: Vec<Vec<f64>>,
}

impl DescriptorRun {
    pub fn candidates(&self, corpus: &Corpus) -> Vec<(String, Vec<f64>)> {
        self.vocab_ids
            .iter()
            .map(|&id| (corpus.vocab.token(id).to_string(), corpus.embeddings.vector(id).to_vec()))
            .collect()
    }

    /// Nearest words and coherence for descriptor rows `rows`.
    pub fn summarize(&self, corpus: &Corpus, rows: &[Vec<f64>], m: usize) -> Result<Vec<DescriptorSummary>> {
        let docs = Cooccurrence::new(corpus.scene_documents());
        nearest_words(rows, &self.candidates(corpus), m)
            .into_iter()
            .enumerate()
            .map(|(index, top_words)| {
                let coherence = semantic_coherence(&top_words, &docs)?;
                Ok(DescriptorSummary {
                    index,
                    top_words,
                    coherence,
                })
            })
            .collect()
    }
}

/// Per-scene targets for every script; scenes with no descriptor word
/// are dropped.
pub fn descriptor_data(corpus: &Corpus, target: &ReconstructionTarget, idx: &[usize]) -> Result<Vec<DescriptorData>> {
    idx.par_iter()
        .map(|&i| {
            let input = corpus.script_input(i);
            let mut u = Vec::new();
            for scene in &input.scenes {
                if let Some(t) = target.target(&corpus.embeddings, scene)? {
                    u.push(t);
                }
            }
            Ok(DescriptorData {
                title: input.title,
                v: u.clone(),
                u,
            })
        })
        .collect()
}

/// Pretrain the BoE+Attn HAN target on tags, then train descriptors on
/// the training scripts.
pub fn train_descriptor_model(cfg: &RunConfig, corpus: &Corpus) -> Result<DescriptorRun> {
    let mut target_cfg = cfg.clone();
    target_cfg.encoder = crate::encoders::EncoderKind::BoeAttn;
    target_cfg.variant = crate::encoders::Variant::Han;
    target_cfg.characters = false;
    let (tagger, _) = train_hierarchical(&target_cfg, corpus)?;
    let (counts, doc_freq) = corpus.token_statistics();
    let vocab_ids = descriptor_vocab(
        &counts,
        &doc_freq,
        cfg.descriptor_min_docs,
        cfg.descriptor_exclude_top,
        &[crate::corpus::UNK_ID],
    );
    info!("descriptor vocabulary: {} words", vocab_ids.len());
    let target = ReconstructionTarget::new(tagger.encoder, tagger.store, vocab_ids.iter().copied())?;
    let data = descriptor_data(corpus, &target, &corpus.indices(Split::Train))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vectors: Vec<Vec<f64>> = vocab_ids.iter().map(|&id| corpus.embeddings.vector(id).to_vec()).collect();
    let mut dcfg = cfg.descriptor.clone();
    dcfg.seed = cfg.seed;
    let initial = init_descriptors(dcfg.init, &vectors, dcfg.k, &mut rng)?;
    let mut store = ParamStore::new();
    let model = DescriptorModel::new(dcfg, cfg.word_dim, &initial, &mut store, &mut rng)?;
    let log = train_descriptors(&model, &mut store, &data)?;
    Ok(DescriptorRun {
        model,
        store,
        target,
        data,
        log,
        vocab_ids,
        initial,
    })
}
