//! Sequence encoders and the three-tier hierarchical script encoder.
//!
//! Every tier (statement, scene, script) uses a [`SeqEncoder`] of one of
//! four kinds: mean of inputs (`boe`), attention-weighted mean
//! (`boe_attn`), bidirectional GRU final state (`gru`), or
//! attention-pooled bidirectional GRU outputs (`gru_attn`).
//!
//! A scene embedding is the concatenation, in fixed order, of one block
//! per active channel (action, dialogue, or all statements for `han`)
//! followed by the optional 10-d character block. A channel with nothing
//! to encode contributes a zero block of its usual width.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{BiGru, Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Boe,
    BoeAttn,
    Gru,
    GruAttn,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Boe => "boe",
            EncoderKind::BoeAttn => "boe_attn",
            EncoderKind::Gru => "gru",
            EncoderKind::GruAttn => "gru_attn",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, EncoderKind::Gru | EncoderKind::GruAttn)
    }

    pub fn has_attention(self) -> bool {
        matches!(self, EncoderKind::BoeAttn | EncoderKind::GruAttn)
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "boe" => EncoderKind::Boe,
            "boe_attn" => EncoderKind::BoeAttn,
            "gru" => EncoderKind::Gru,
            "gru_attn" => EncoderKind::GruAttn,
            _ => return Err(Error::Config(format!("unknown encoder kind {s:?}"))),
        })
    }
}

/// How attention scores `p·c_i` become weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    /// `α = softmax(p·c)`.
    #[default]
    Softmax,
    /// `α_i = p·c_i / Σ_j p·c_j`, unnormalized by any exponential.
    PaperLinear,
}

/// Structural variants of the hierarchical encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Separate action and dialogue statement/scene encoders.
    #[default]
    Full,
    /// `Full` plus the character block.
    PlusChars,
    /// Dialogue channel only.
    MinusAction,
    /// Action channel only.
    MinusDialogue,
    /// No statement tier: each channel's words are concatenated per scene.
    TwoTier,
    /// One statement encoder and one scene encoder over all statements.
    Han,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::PlusChars => "plus_chars",
            Variant::MinusAction => "minus_action",
            Variant::MinusDialogue => "minus_dialogue",
            Variant::TwoTier => "two_tier",
            Variant::Han => "han",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => Variant::Full,
            "plus_chars" => Variant::PlusChars,
            "minus_action" => Variant::MinusAction,
            "minus_dialogue" => Variant::MinusDialogue,
            "two_tier" => Variant::TwoTier,
            "han" => Variant::Han,
            _ => return Err(Error::Config(format!("unknown variant {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub input_dim: usize,
    pub hidden_per_direction: usize,
    pub attention: AttentionMode,
}

impl EncoderSpec {
    pub fn output_dim(&self) -> usize {
        if self.kind.is_recurrent() {
            2 * self.hidden_per_direction
        } else {
            self.input_dim
        }
    }

    /// Width of the attention vector `p`, which equals the width of the
    /// sequence it attends over.
    pub fn attention_dim(&self) -> usize {
        self.output_dim()
    }
}

/// Hyperparameters of a hierarchical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: EncoderKind,
    pub variant: Variant,
    pub characters: bool,
    pub word_dim: usize,
    pub hidden_per_direction: usize,
    pub char_dim: usize,
    pub attention: AttentionMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::GruAttn,
            variant: Variant::Full,
            characters: false,
            word_dim: 100,
            hidden_per_direction: 50,
            char_dim: 10,
            attention: AttentionMode::Softmax,
        }
    }
}

impl ModelConfig {
    pub fn new(kind: EncoderKind, variant: Variant) -> Self {
        Self {
            kind,
            variant,
            characters: variant == Variant::PlusChars,
            ..Self::default()
        }
    }

    pub fn uses_characters(&self) -> bool {
        self.characters || self.variant == Variant::PlusChars
    }

    fn spec(&self, input_dim: usize) -> EncoderSpec {
        EncoderSpec {
            kind: self.kind,
            input_dim,
            hidden_per_direction: self.hidden_per_direction,
            attention: self.attention,
        }
    }
}

/// Frozen word vectors indexed by vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidTensor(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidTensor("ragged embedding rows".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vector(&self, id: u32) -> &[f64] {
        let i = id as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `[T, dim]` matrix of the given ids.
    pub fn lookup(&self, ids: &[u32]) -> Tensor {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            data.extend_from_slice(self.vector(id));
        }
        Tensor::new(vec![ids.len(), self.dim], data).expect("row width")
    }
}

/// Attention pooling over the rows of `cs` (`[T, d]`) with vector `p`.
/// Returns the pooled vector and the weight vector.
pub fn attend(g: &mut Graph, cs: Var, p: Var, mode: AttentionMode) -> Result<(Var, Var)> {
    let shape = g.value(cs).shape().to_vec();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(Error::EmptySequence("attend"));
    }
    let scores = g.matmul(cs, p)?;
    let weights = match mode {
        AttentionMode::Softmax => g.softmax(scores)?,
        AttentionMode::PaperLinear => g.normalize_sum(scores)?,
    };
    let pooled = g.matmul(weights, cs)?;
    Ok((pooled, weights))
}

#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub output: Var,
    pub weights: Option<Var>,
}

/// One encoder tier.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqEncoder {
    pub spec: EncoderSpec,
    gru: Option<BiGru>,
    attention: Option<ParamId>,
}

impl SeqEncoder {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, spec: EncoderSpec, rng: &mut R) -> Self {
        let gru = spec.kind.is_recurrent().then(|| {
            BiGru::new(
                store,
                &format!("{prefix}.gru"),
                spec.input_dim,
                spec.hidden_per_direction,
                rng,
            )
        });
        let attention = spec.kind.has_attention().then(|| {
            let d = spec.attention_dim();
            store.add_glorot(format!("{prefix}.p"), &[d], Some((d, 1)), rng)
        });
        Self {
            spec,
            gru,
            attention,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn attention_param(&self) -> Option<ParamId> {
        self.attention
    }

    /// Encode the rows of `xs` (`[T, input_dim]`, `T ≥ 1`).
    pub fn encode(&self, g: &mut Graph, store: &ParamStore, xs: Var) -> Result<Encoded> {
        let shape = g.value(xs).shape().to_vec();
        if shape.len() != 2 || shape[1] != self.spec.input_dim {
            return Err(Error::ShapeMismatch {
                op: "encode",
                left: shape,
                right: vec![0, self.spec.input_dim],
            });
        }
        if shape[0] == 0 {
            return Err(Error::EmptySequence("encode"));
        }
        match self.spec.kind {
            EncoderKind::Boe => Ok(Encoded {
                output: g.mean_rows(xs)?,
                weights: None,
            }),
            EncoderKind::BoeAttn => {
                let p = g.param(store, self.attention.expect("attention"));
                let (output, w) = attend(g, xs, p, self.spec.attention)?;
                Ok(Encoded {
                    output,
                    weights: Some(w),
                })
            }
            EncoderKind::Gru => {
                let out = self.gru.as_ref().expect("gru").run(g, store, xs)?;
                Ok(Encoded {
                    output: out.final_state,
                    weights: None,
                })
            }
            EncoderKind::GruAttn => {
                let out = self.gru.as_ref().expect("gru").run(g, store, xs)?;
                let cs = g.stack(&out.outputs)?;
                let p = g.param(store, self.attention.expect("attention"));
                let (output, w) = attend(g, cs, p, self.spec.attention)?;
                Ok(Encoded {
                    output,
                    weights: Some(w),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Action,
    Dialogue,
}

/// A tokenized statement. `character` is set for dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementInput {
    pub channel: Channel,
    pub tokens: Vec<u32>,
    pub character: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SceneInput {
    /// Statements in original (interleaved) order.
    pub statements: Vec<StatementInput>,
    /// Distinct character ids with at least one dialogue statement.
    pub characters: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptInput {
    pub title: String,
    pub scenes: Vec<SceneInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Action,
    Dialogue,
    All,
}

impl Source {
    fn accepts(self, c: Channel) -> bool {
        match self {
            Source::All => true,
            Source::Action => c == Channel::Action,
            Source::Dialogue => c == Channel::Dialogue,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Source::Action => "action",
            Source::Dialogue => "dialogue",
            Source::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ChannelEncoders {
    source: Source,
    statement: Option<SeqEncoder>,
    scene: SeqEncoder,
}

/// Named block of a scene embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: &'static str,
    pub start: usize,
    pub len: usize,
}

/// Output of [`HierarchicalModel::encode_script`].
#[derive(Debug, Clone)]
pub struct ScriptEncoding {
    pub embedding: Var,
    pub scene_embeddings: Vec<Var>,
    /// Attention over scenes when the script encoder attends.
    pub scene_weights: Option<Var>,
}

/// Three-tier hierarchical encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalModel {
    pub config: ModelConfig,
    channels: Vec<ChannelEncoders>,
    characters: Option<(ParamId, usize)>,
    script: SeqEncoder,
}

impl HierarchicalModel {
    /// Register all parameters for `config` in `store`. `n_characters`
    /// counts the character vocabulary including its unknown entry.
    pub fn build<R: Rng>(
        config: ModelConfig,
        n_characters: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        if config.word_dim == 0 || config.hidden_per_direction == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        let sources: &[Source] = match config.variant {
            Variant::Full | Variant::PlusChars | Variant::TwoTier => &[Source::Action, Source::Dialogue],
            Variant::MinusAction => &[Source::Dialogue],
            Variant::MinusDialogue => &[Source::Action],
            Variant::Han => &[Source::All],
        };
        let mut channels = Vec::new();
        for &source in sources {
            let statement = (config.variant != Variant::TwoTier).then(|| {
                SeqEncoder::new(
                    store,
                    &format!("{}.statement", source.name()),
                    config.spec(config.word_dim),
                    rng,
                )
            });
            let scene_in = statement.as_ref().map_or(config.word_dim, SeqEncoder::output_dim);
            let scene = SeqEncoder::new(
                store,
                &format!("{}.scene", source.name()),
                config.spec(scene_in),
                rng,
            );
            channels.push(ChannelEncoders {
                source,
                statement,
                scene,
            });
        }
        let characters = if config.uses_characters() {
            let n = n_characters.max(1);
            let id = store.add_glorot(
                "characters",
                &[n, config.char_dim],
                Some((config.char_dim, config.char_dim)),
                rng,
            );
            Some((id, n))
        } else {
            None
        };
        let scene_dim = channels.iter().map(|c| c.scene.output_dim()).sum::<usize>()
            + characters.map_or(0, |_| config.char_dim);
        let script = SeqEncoder::new(store, "script", config.spec(scene_dim), rng);
        Ok(Self {
            config,
            channels,
            characters,
            script,
        })
    }

    /// Layout of the scene embedding.
    pub fn scene_blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        let mut start = 0;
        for c in &self.channels {
            let len = c.scene.output_dim();
            out.push(Block {
                name: c.source.name(),
                start,
                len,
            });
            start += len;
        }
        if self.characters.is_some() {
            out.push(Block {
                name: "characters",
                start,
                len: self.config.char_dim,
            });
        }
        out
    }

    pub fn scene_dim(&self) -> usize {
        self.scene_blocks().iter().map(|b| b.len).sum()
    }

    pub fn output_dim(&self) -> usize {
        self.script.output_dim()
    }

    pub fn script_encoder(&self) -> &SeqEncoder {
        &self.script
    }

    /// Encode one statement's tokens with a statement-tier encoder.
    pub fn encode_statement(
        encoder: &SeqEncoder,
        g: &mut Graph,
        store: &ParamStore,
        emb: &EmbeddingTable,
        tokens: &[u32],
    ) -> Result<Encoded> {
        if tokens.is_empty() {
            return Err(Error::EmptyStatement);
        }
        let xs = g.constant(emb.lookup(tokens));
        encoder.encode(g, store, xs)
    }

    fn encode_channel(
        &self,
        ch: &ChannelEncoders,
        g: &mut Graph,
        store: &ParamStore,
        emb: &EmbeddingTable,
        scene: &SceneInput,
    ) -> Result<Var> {
        let stmts: Vec<&StatementInput> = scene
            .statements
            .iter()
            .filter(|s| ch.source.accepts(s.channel) && !s.tokens.is_empty())
            .collect();
        if stmts.is_empty() {
            return Ok(g.constant(Tensor::zeros(&[ch.scene.output_dim()])));
        }
        let xs = match &ch.statement {
            Some(enc) => {
                let rows = stmts
                    .iter()
                    .map(|s| Self::encode_statement(enc, g, store, emb, &s.tokens).map(|e| e.output))
                    .collect::<Result<Vec<_>>>()?;
                g.stack(&rows)?
            }
            None => {
                let words: Vec<u32> = stmts.iter().flat_map(|s| s.tokens.iter().copied()).collect();
                g.constant(emb.lookup(&words))
            }
        };
        Ok(ch.scene.encode(g, store, xs)?.output)
    }

    /// Concatenated scene embedding in [`Self::scene_blocks`] order.
    pub fn encode_scene(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        emb: &EmbeddingTable,
        scene: &SceneInput,
    ) -> Result<Var> {
        if emb.dim() != self.config.word_dim {
            return Err(Error::EmbeddingDimMismatch {
                expected: self.config.word_dim,
                found: emb.dim(),
                context: "word embeddings".into(),
            });
        }
        let mut blocks = Vec::with_capacity(self.channels.len() + 1);
        for ch in &self.channels {
            blocks.push(self.encode_channel(ch, g, store, emb, scene)?);
        }
        if let Some((table, n)) = self.characters {
            if scene.characters.is_empty() {
                blocks.push(g.constant(Tensor::zeros(&[self.config.char_dim])));
            } else {
                let t = g.param(store, table);
                let rows = scene
                    .characters
                    .iter()
                    .map(|&c| g.row(t, if (c as usize) < n { c as usize } else { 0 }))
                    .collect::<Result<Vec<_>>>()?;
                let m = g.stack(&rows)?;
                blocks.push(g.mean_rows(m)?);
            }
        }
        if blocks.len() == 1 {
            Ok(blocks[0])
        } else {
            g.concat(&blocks)
        }
    }

    pub fn encode_script(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        emb: &EmbeddingTable,
        script: &ScriptInput,
    ) -> Result<ScriptEncoding> {
        if script.scenes.is_empty() {
            return Err(Error::EmptyScript);
        }
        let scene_embeddings = script
            .scenes
            .iter()
            .map(|s| self.encode_scene(g, store, emb, s))
            .collect::<Result<Vec<_>>>()?;
        let xs = g.stack(&scene_embeddings)?;
        let enc = self.script.encode(g, store, xs)?;
        Ok(ScriptEncoding {
            embedding: enc.output,
            scene_embeddings,
            scene_weights: enc.weights,
        })
    }

    /// Scene embeddings as plain vectors, without keeping a graph.
    pub fn scene_vectors(
        &self,
        store: &ParamStore,
        emb: &EmbeddingTable,
        script: &ScriptInput,
    ) -> Result<Vec<Vec<f64>>> {
        script
            .scenes
            .iter()
            .map(|s| {
                let mut g = Graph::new();
                let v = self.encode_scene(&mut g, store, emb, s)?;
                Ok(g.value(v).data().to_vec())
            })
            .collect()
    }
}

/// Anything that maps one document to a fixed-width embedding on a tape.
pub trait DocumentEncoder {
    type Input;

    fn output_dim(&self) -> usize;

    fn encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        emb: &EmbeddingTable,
        input: &Self::Input,
    ) -> Result<Var>;
}

impl DocumentEncoder for HierarchicalModel {
    type Input = ScriptInput;

    fn output_dim(&self) -> usize {
        HierarchicalModel::output_dim(self)
    }

    fn encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        emb: &EmbeddingTable,
        input: &ScriptInput,
    ) -> Result<Var> {
        Ok(self.encode_script(g, store, emb, input)?.embedding)
    }
}
