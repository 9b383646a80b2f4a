use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use scriptenc::checkpoint::{self, CheckpointKind, Manifest};
use scriptenc::classifier::{log_csv, LabelMatrix, LossForm, TrainOutcome};
use scriptenc::corpus::{self, synth, write_atomic, Corpus, RunConfig, Split};
use scriptenc::descriptor::InitMode;
use scriptenc::encoders::{AttentionMode, EncoderKind, Variant};
use scriptenc::evaluation::{cutoff_sweep, exact_counts, read_tag_embeddings, CutoffRow};
use scriptenc::parser::{self, ParserConfig};
use scriptenc::pipeline::{self, HierarchicalTagger, LoglineTagger};
use scriptenc::trajectories::{self, Annotation, Format};
use scriptenc::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "scriptenc", version, about = "Screenplay encoders, tag prediction and scene descriptors")]
pub struct Cli {
    /// Default output directory.
    #[arg(long, global = true, env = "SCRIPTENC_OUT", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse screenplays into Title/Line/Scene/Type/Character/Text tables.
    Parse(ParseArgs),
    /// Parse, filter and split a corpus; write its manifest and vocabulary.
    Ingest(CorpusArgs),
    /// Train a tag model and write a checkpoint and training log.
    Train(TrainArgs),
    /// Micro-F1 of a checkpoint on a split.
    Evaluate(EvalArgs),
    /// Similarity-thresholded F1 and taxonomy statistics over cutoffs.
    EvalSim(EvalSimArgs),
    /// Train scene descriptors and report their nearest words.
    Descriptors(DescriptorArgs),
    /// Smoothed descriptor trajectories for one script as CSV or SVG.
    Trajectories(TrajectoryArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    /// A screenplay file or a directory of `*.txt` files.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = parser::DEFAULT_SCENE_CAP)]
    pub scene_cap: usize,
    /// Leave long scenes unsplit.
    #[arg(long)]
    pub no_split: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    #[arg(long)]
    pub scripts: PathBuf,
    #[arg(long)]
    pub tags: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub loglines: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub heldout_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, default_value_t = parser::DEFAULT_SCENE_CAP)]
    pub scene_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Weighted,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttentionArg {
    Softmax,
    PaperLinear,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "genre")]
    pub attribute: String,
    /// An encoder (boe, boe_attn, gru, gru_attn) with the full structure,
    /// a structural variant (full, plus_chars, minus_action,
    /// minus_dialogue, two_tier, han), or `loglines`.
    #[arg(long, default_value = "gru_attn")]
    pub variant: String,
    /// Encoder kind when `--variant` names a structure.
    #[arg(long)]
    pub encoder: Option<String>,
    /// Add the character block to the scene embedding.
    #[arg(long)]
    pub characters: bool,
    #[arg(long, value_enum, default_value = "softmax")]
    pub attention: AttentionArg,
    #[arg(long, default_value_t = 20)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub lr: f64,
    #[arg(long, value_enum, default_value = "weighted")]
    pub loss: LossArg,
    /// Record wallclock seconds in the training log.
    #[arg(long)]
    pub wallclock: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "heldout")]
    pub split: SplitArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Heldout,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Heldout => Split::Heldout,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalSimArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long)]
    pub tag_embeddings: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "100,90,80,70")]
    pub cutoffs: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct DescriptorArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "genre")]
    pub attribute: String,
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    #[arg(long, default_value = "kmeans")]
    pub init: String,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    /// Use the non-recurrent predictor.
    #[arg(long)]
    pub no_recurrence: bool,
    /// Epochs for pretraining the reconstruction target on tags.
    #[arg(long, default_value_t = 20)]
    pub target_epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub min_docs: u64,
    #[arg(long, default_value_t = 500)]
    pub exclude_top: usize,
    #[arg(long, default_value_t = 10)]
    pub top_words: usize,
}

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    /// Output directory of the `descriptors` command.
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub script: String,
    /// Comma list of descriptor indices or `top:m`.
    #[arg(long, default_value = "top:5")]
    pub descriptors: String,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// `scene:LABEL` with a 0-based scene index; repeatable.
    #[arg(long)]
    pub annotate: Vec<String>,
    #[arg(long, default_value = "svg")]
    pub format: String,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    pub scripts: usize,
    #[arg(long, default_value_t = 3)]
    pub tags: usize,
    #[arg(long, default_value_t = 0.8)]
    pub signal: f64,
    /// Plant reversed marker pairs in negative scripts.
    #[arg(long)]
    pub order_sensitive: bool,
    #[arg(long, default_value_t = 3)]
    pub topics: usize,
    /// Norm of marker embeddings; other words are unit length.
    #[arg(long, default_value_t = 4.0)]
    pub marker_norm: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Parse(a) => parse_cmd(&cli, a),
        Command::Ingest(a) => ingest_cmd(&cli, a),
        Command::Train(a) => train_cmd(&cli, a),
        Command::Evaluate(a) => evaluate_cmd(&cli, a),
        Command::EvalSim(a) => eval_sim_cmd(&cli, a),
        Command::Descriptors(a) => descriptors_cmd(&cli, a),
        Command::Trajectories(a) => trajectories_cmd(&cli, a),
        Command::Synth(a) => synth_cmd(&cli, a),
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    Ok((serde_json::to_string_pretty(v)? + "\n").into_bytes())
}

fn parse_cmd(cli: &Cli, a: &ParseArgs) -> Result<()> {
    let files: Vec<PathBuf> = if a.input.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&a.input)
            .map_err(|e| Error::io(&a.input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        v.sort();
        v
    } else {
        vec![a.input.clone()]
    };
    let cfg = ParserConfig::default();
    for path in files {
        let title = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let parsed = parser::parse_text(&title, &text, &cfg)?;
        let sp = if a.no_split {
            parsed.screenplay
        } else {
            parser::split_long_scenes(&parsed.screenplay, a.scene_cap)
        };
        write_atomic(&cli.out.join(format!("{title}.tsv")), parser::to_table(&sp).as_bytes())?;
        write_atomic(&cli.out.join(format!("{title}.quality.json")), &json_bytes(&parsed.report)?)?;
        info!("{title}: {} scenes", sp.scenes.len());
    }
    Ok(())
}

fn base_config(cli: &Cli, c: &CorpusArgs) -> RunConfig {
    RunConfig {
        seed: cli.seed,
        scripts: c.scripts.clone(),
        tags: c.tags.clone(),
        embeddings: c.embeddings.clone(),
        loglines: c.loglines.clone(),
        heldout_fraction: c.heldout_fraction,
        validation_fraction: c.validation_fraction,
        min_count: c.min_count,
        scene_cap: c.scene_cap,
        ..RunConfig::default()
    }
}

fn ingest_cmd(cli: &Cli, a: &CorpusArgs) -> Result<()> {
    let cfg = base_config(cli, a);
    let corpus = corpus::ingest(&cfg)?;
    write_atomic(&cli.out.join("corpus_manifest.json"), &json_bytes(&corpus.manifest(&cfg))?)?;
    write_atomic(&cli.out.join("vocab.txt"), corpus.vocab.to_text().as_bytes())?;
    println!(
        "{} scripts, {} excluded, vocabulary {}",
        corpus.scripts.len(),
        corpus.excluded.len(),
        corpus.vocab.len()
    );
    Ok(())
}

fn resolve_model(a: &TrainArgs, cfg: &mut RunConfig) -> Result<()> {
    if a.variant == "loglines" {
        cfg.loglines_baseline = true;
        return Ok(());
    }
    if let Ok(kind) = a.variant.parse::<EncoderKind>() {
        if a.encoder.is_some() {
            return Err(Error::Config("--encoder conflicts with an encoder-valued --variant".into()));
        }
        cfg.encoder = kind;
        cfg.variant = Variant::Full;
    } else {
        cfg.variant = a.variant.parse()?;
        cfg.encoder = match &a.encoder {
            Some(e) => e.parse()?,
            None => EncoderKind::GruAttn,
        };
    }
    Ok(())
}

fn manifest_for(cfg: &RunConfig, corpus: &Corpus, kind: CheckpointKind, outcome: Option<&TrainOutcome>) -> Manifest {
    Manifest {
        kind,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        vocab_hash: corpus.vocab.hash(),
        params_sha256: String::new(),
        config: cfg.clone(),
        taxonomy: None,
        characters: corpus.characters.tokens().to_vec(),
        best_epoch: outcome.map(|o| o.best_epoch),
    }
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut cfg = base_config(cli, &a.corpus);
    cfg.attribute = a.attribute.clone();
    cfg.characters = a.characters;
    cfg.attention = match a.attention {
        AttentionArg::Softmax => AttentionMode::Softmax,
        AttentionArg::PaperLinear => AttentionMode::PaperLinear,
    };
    cfg.train.max_epochs = a.max_epochs;
    cfg.train.patience = a.patience;
    cfg.train.lr = a.lr;
    cfg.train.seed = cli.seed;
    cfg.train.loss = match a.loss {
        LossArg::Weighted => LossForm::Weighted,
        LossArg::Printed => LossForm::Printed,
    };
    resolve_model(a, &mut cfg)?;
    let corpus = corpus::ingest(&cfg)?;
    let ckpt = cli.out.join("checkpoint");
    let (outcome, manifest) = if cfg.loglines_baseline {
        let (m, outcome) = pipeline::train_logline(&cfg, &corpus)?;
        let mut manifest = manifest_for(&cfg, &corpus, CheckpointKind::Logline, Some(&outcome));
        manifest.taxonomy = Some(m.taxonomy.clone());
        (outcome, checkpoint::save(&ckpt, &m.store, manifest)?)
    } else {
        let (m, outcome) = pipeline::train_hierarchical(&cfg, &corpus)?;
        let mut manifest = manifest_for(&cfg, &corpus, CheckpointKind::Tagger, Some(&outcome));
        manifest.taxonomy = Some(m.taxonomy.clone());
        (outcome, checkpoint::save(&ckpt, &m.store, manifest)?)
    };
    write_atomic(&cli.out.join("train_log.csv"), log_csv(&outcome.log, a.wallclock).as_bytes())?;
    write_atomic(&cli.out.join("vocab.txt"), corpus.vocab.to_text().as_bytes())?;
    println!(
        "best epoch {} (validation AP {:.4}), stopped at {}; config {}",
        outcome.best_epoch, outcome.best_val_ap, outcome.stopped_epoch, manifest.config_hash
    );
    Ok(())
}

enum Loaded {
    Hierarchical(HierarchicalTagger),
    Logline(LoglineTagger),
}

/// Re-ingest the checkpoint's corpus and restore its model.
fn load_tagger(dir: &Path) -> Result<(Manifest, Corpus, Loaded)> {
    let (manifest, entries) = checkpoint::load(dir)?;
    let corpus = corpus::ingest(&manifest.config)?;
    let vh = corpus.vocab.hash();
    if vh != manifest.vocab_hash {
        return Err(Error::VocabularyMismatch {
            checkpoint: manifest.vocab_hash.clone(),
            corpus: vh,
        });
    }
    if corpus.characters.tokens() != manifest.characters.as_slice() {
        return Err(Error::Checkpoint("character vocabulary differs from the checkpoint".into()));
    }
    let tax = manifest
        .taxonomy
        .clone()
        .ok_or_else(|| Error::Checkpoint("checkpoint has no tag taxonomy".into()))?;
    let loaded = match manifest.kind {
        CheckpointKind::Tagger => {
            let mut m = pipeline::build_hierarchical(&manifest.config, &corpus, tax)?;
            checkpoint::restore(&mut m.store, &entries)?;
            Loaded::Hierarchical(m)
        }
        CheckpointKind::Logline => {
            let mut m = pipeline::build_logline(&manifest.config, tax);
            checkpoint::restore(&mut m.store, &entries)?;
            Loaded::Logline(m)
        }
        CheckpointKind::Descriptor => {
            return Err(Error::Checkpoint("descriptor checkpoints cannot be evaluated for tags".into()))
        }
    };
    Ok((manifest, corpus, loaded))
}

/// Predictions and gold labels on a split, restricted to active tags.
fn predictions(corpus: &Corpus, loaded: &Loaded, split: Split, threshold: f64) -> Result<(Vec<String>, LabelMatrix, LabelMatrix)> {
    let idx = corpus.indices(split);
    let (tax, idx, pred) = match loaded {
        Loaded::Hierarchical(m) => (&m.taxonomy, idx.clone(), m.predict(corpus, &pipeline::script_inputs(corpus, &idx), threshold)?),
        Loaded::Logline(m) => {
            let (kept, inputs) = pipeline::logline_inputs(corpus, &idx);
            (&m.taxonomy, kept, m.predict(corpus, &inputs, threshold)?)
        }
    };
    let active = tax.active_indices();
    let gold = corpus.labels(&idx, &tax.attribute, &tax.tags);
    let tags = active.iter().map(|&j| tax.tags[j].clone()).collect();
    Ok((tags, pred.select_columns(&active), gold.select_columns(&active)))
}

#[derive(Debug, Serialize)]
struct F1Report {
    config_hash: String,
    seed: u64,
    split: Split,
    model: String,
    attribute: String,
    scripts: usize,
    tags: Vec<String>,
    micro_f1: f64,
    precision: f64,
    recall: f64,
}

fn model_name(cfg: &RunConfig) -> String {
    if cfg.loglines_baseline {
        "loglines".into()
    } else {
        format!("{}/{}", cfg.encoder.name(), cfg.variant.name())
    }
}

fn evaluate_cmd(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let (manifest, corpus, loaded) = load_tagger(&a.checkpoint)?;
    let split = a.split.into();
    let (tags, pred, gold) = predictions(&corpus, &loaded, split, manifest.config.train.threshold)?;
    let c = exact_counts(&pred, &gold)?;
    let report = F1Report {
        config_hash: manifest.config_hash.clone(),
        seed: manifest.seed,
        split,
        model: model_name(&manifest.config),
        attribute: manifest.config.attribute.clone(),
        scripts: pred.rows(),
        tags,
        micro_f1: c.f1(),
        precision: c.precision(),
        recall: c.recall(),
    };
    write_atomic(&cli.out.join("evaluation.json"), &json_bytes(&report)?)?;
    let table = format!(
        "Model\t{}\n{}\t{:.4}\n",
        report.attribute, report.model, report.micro_f1
    );
    write_atomic(&cli.out.join("evaluation.tsv"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimReport {
    config_hash: String,
    seed: u64,
    split: Split,
    attribute: String,
    rows: Vec<CutoffRow>,
}

fn eval_sim_cmd(cli: &Cli, a: &EvalSimArgs) -> Result<()> {
    let (manifest, corpus, loaded) = load_tagger(&a.eval.checkpoint)?;
    let split = a.eval.split.into();
    let (tags, pred, gold) = predictions(&corpus, &loaded, split, manifest.config.train.threshold)?;
    let attribute = manifest.config.attribute.clone();
    let spaces = read_tag_embeddings(&a.tag_embeddings)?;
    let space = spaces
        .get(&attribute)
        .ok_or_else(|| Error::UnknownTag(format!("no tag embeddings for attribute {attribute:?}")))?
        .reorder(&tags)?;
    let all: Vec<usize> = (0..corpus.scripts.len()).collect();
    let full = corpus.labels(&all, &attribute, &tags);
    let counts: Vec<f64> = (0..tags.len()).map(|j| full.column_sum(j) as f64).collect();
    let rows = cutoff_sweep(&pred, &gold, &space, &counts, &a.cutoffs)?;
    let mut csv = String::from("cutoff,f1,precision,recall,classes,perplexity,perplexity_reduction,cardinality,cardinality_reduction\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6}\n",
            r.cutoff, r.f1, r.precision, r.recall, r.classes, r.perplexity, r.perplexity_reduction, r.cardinality, r.cardinality_reduction
        ));
    }
    let by_cutoff: BTreeMap<String, BTreeMap<&str, f64>> = rows
        .iter()
        .map(|r| {
            (
                format!("{}", r.cutoff),
                BTreeMap::from([
                    ("F1", r.f1),
                    ("perplexity_reduction", r.perplexity_reduction),
                    ("cardinality_reduction", r.cardinality_reduction),
                ]),
            )
        })
        .collect();
    let report = SimReport {
        config_hash: manifest.config_hash.clone(),
        seed: manifest.seed,
        split,
        attribute: attribute.clone(),
        rows,
    };
    write_atomic(&cli.out.join("eval_sim.json"), &json_bytes(&report)?)?;
    write_atomic(
        &cli.out.join("eval_sim_summary.json"),
        &json_bytes(&BTreeMap::from([(attribute, by_cutoff)]))?,
    )?;
    write_atomic(&cli.out.join("eval_sim.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct DescriptorReport {
    config_hash: String,
    seed: u64,
    vocabulary: usize,
    initial_orthogonality: f64,
    final_orthogonality: f64,
    descriptors: Vec<pipeline::DescriptorSummary>,
}

fn descriptors_cmd(cli: &Cli, a: &DescriptorArgs) -> Result<()> {
    let mut cfg = base_config(cli, &a.corpus);
    cfg.attribute = a.attribute.clone();
    cfg.train.max_epochs = a.target_epochs;
    cfg.descriptor.k = a.k;
    cfg.descriptor.init = a.init.parse::<InitMode>()?;
    cfg.descriptor.epochs = a.epochs;
    cfg.descriptor.lambda = a.lambda;
    cfg.descriptor.negatives = a.negatives;
    cfg.descriptor.recurrent = !a.no_recurrence;
    cfg.descriptor_min_docs = a.min_docs;
    cfg.descriptor_exclude_top = a.exclude_top;
    let corpus = corpus::ingest(&cfg)?;
    let run = pipeline::train_descriptor_model(&cfg, &corpus)?;
    let rows = run.model.descriptors(&run.store);
    let report = DescriptorReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        vocabulary: run.vocab_ids.len(),
        initial_orthogonality: run.log.initial_orthogonality,
        final_orthogonality: run.model.orthogonality(&run.store),
        descriptors: run.summarize(&corpus, &rows, a.top_words)?,
    };
    let mut manifest = manifest_for(&cfg, &corpus, CheckpointKind::Descriptor, None);
    manifest.best_epoch = Some(cfg.descriptor.epochs);
    checkpoint::save(&cli.out.join("checkpoint"), &run.store, manifest.clone())?;
    checkpoint::save(&cli.out.join("target"), run.target.params(), manifest)?;
    // scene weights for every script, for trajectories
    let all: Vec<usize> = (0..corpus.scripts.len()).collect();
    let data = pipeline::descriptor_data(&corpus, &run.target, &all)?;
    let mut weights = BTreeMap::new();
    for d in &data {
        if !d.v.is_empty() {
            weights.insert(d.title.clone(), run.model.scene_weights(&run.store, &d.v)?);
        }
    }
    write_atomic(&cli.out.join("scene_weights.json"), &json_bytes(&weights)?)?;
    write_atomic(&cli.out.join("descriptors.json"), &json_bytes(&report)?)?;
    write_atomic(&cli.out.join("descriptor_log.json"), &json_bytes(&run.log)?)?;
    for d in &report.descriptors {
        println!("{:>3} {:>9.3}  {}", d.index, d.coherence, d.top_words.join(" "));
    }
    Ok(())
}

fn trajectories_cmd(cli: &Cli, a: &TrajectoryArgs) -> Result<()> {
    let format: Format = a.format.parse()?;
    let weights: BTreeMap<String, Vec<Vec<f64>>> = corpus::read_json(&a.weights.join("scene_weights.json"))?;
    let w = weights
        .get(&a.script)
        .ok_or_else(|| Error::Config(format!("no scene weights for script {:?}", a.script)))?;
    let selected = trajectories::select(w, &a.descriptors)?;
    let trajs = trajectories::compute(w, &selected, a.window)?;
    let annotations = a.annotate.iter().map(|s| s.parse::<Annotation>()).collect::<Result<Vec<_>>>()?;
    let (name, body) = match format {
        Format::Csv => ("csv", trajectories::to_csv(&trajs)),
        Format::Svg => {
            let report: serde_json::Value = corpus::read_json(&a.weights.join("descriptors.json"))?;
            let names: Vec<String> = selected
                .iter()
                .map(|&k| {
                    let words = report["descriptors"][k]["top_words"]
                        .as_array()
                        .map(|ws| ws.iter().take(3).filter_map(|w| w.as_str()).collect::<Vec<_>>().join(" "))
                        .unwrap_or_default();
                    format!("{k}: {words}")
                })
                .collect();
            ("svg", trajectories::to_svg(&trajs, &annotations, &names))
        }
    };
    let path = cli.out.join(format!("{}.trajectory.{name}", a.script));
    write_atomic(&path, body.as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

fn synth_cmd(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let cfg = synth::SynthConfig {
        scripts: a.scripts,
        tags: a.tags,
        signal: a.signal,
        seed: cli.seed,
        order_sensitive: a.order_sensitive,
        topics: a.topics,
        marker_norm: a.marker_norm,
        ..synth::SynthConfig::default()
    };
    synth::generate(&cfg)?.write(&cli.out)?;
    println!("{} scripts written to {}", cfg.scripts, cli.out.display());
    Ok(())
}
