//! Scene descriptors: each scene embedding is explained as a mixture of
//! `k` corpus-level descriptor vectors living in word-embedding space,
//! trained to reconstruct a frozen attention-weighted bag-of-words target.

use std::collections::HashSet;

use log::warn;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{
    Channel, EmbeddingTable, EncoderKind, HierarchicalModel, ModelConfig, SceneInput, StatementInput, Variant,
};
use crate::error::{Error, Result};
use crate::tensor::{clip_grad_norm, glorot_limit, ops, Adam, AdamConfig, Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    RandomGlorot,
    #[default]
    Kmeans,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_glorot" | "glorot" | "random" => Ok(Self::RandomGlorot),
            "kmeans" => Ok(Self::Kmeans),
            _ => Err(Error::Config(format!("unknown descriptor init {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub k: usize,
    pub hidden: usize,
    pub lambda: f64,
    pub negatives: usize,
    pub recurrent: bool,
    pub alpha: f64,
    pub epochs: usize,
    pub lr: f64,
    pub max_norm: f64,
    pub init: InitMode,
    pub seed: u64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            k: 25,
            hidden: 100,
            lambda: 10.0,
            negatives: 5,
            recurrent: true,
            alpha: 0.5,
            epochs: 10,
            lr: 5e-3,
            max_norm: 5.0,
            init: InitMode::Kmeans,
            seed: 0,
        }
    }
}

/// Two-layer feedforward map onto the `k`-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    pub input_dim: usize,
    pub k: usize,
    pub recurrent: bool,
    pub alpha: f64,
}

impl Predictor {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        input_dim: usize,
        hidden: usize,
        k: usize,
        recurrent: bool,
        alpha: f64,
        rng: &mut R,
    ) -> Self {
        let fan_in = input_dim + if recurrent { k } else { 0 };
        Self {
            w1: store.add_glorot("predictor.w1", &[hidden, fan_in], None, rng),
            b1: store.add_zeros("predictor.b1", &[hidden]),
            w2: store.add_glorot("predictor.w2", &[k, hidden], None, rng),
            b2: store.add_zeros("predictor.b2", &[k]),
            input_dim,
            k,
            recurrent,
            alpha,
        }
    }

    fn ffnn(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let (w1, b1, w2, b2) = (
            g.param(store, self.w1),
            g.param(store, self.b1),
            g.param(store, self.w2),
            g.param(store, self.b2),
        );
        let a = g.matmul(w1, x)?;
        let a = g.add(a, b1)?;
        let h = g.relu(a);
        let z = g.matmul(w2, h)?;
        let z = g.add(z, b2)?;
        g.softmax(z)
    }

    /// Descriptor weights for one scene. The recurrent form mixes the
    /// previous weights back in: `o = (1−α)·f([v; o_prev]) + α·o_prev`.
    pub fn predict(&self, g: &mut Graph, store: &ParamStore, v: Var, o_prev: Option<Var>) -> Result<Var> {
        if !self.recurrent {
            return self.ffnn(g, store, v);
        }
        let prev = match o_prev {
            Some(p) => p,
            None => g.constant(Tensor::vector(vec![1.0 / self.k as f64; self.k])),
        };
        let x = g.concat(&[v, prev])?;
        let f = self.ffnn(g, store, x)?;
        let f = g.scale(f, 1.0 - self.alpha);
        let p = g.scale(prev, self.alpha);
        g.add(f, p)
    }
}

/// `w = Rᵀ o`.
pub fn reconstruct(g: &mut Graph, r: Var, o: Var) -> Result<Var> {
    let rt = g.transpose(r)?;
    g.matmul(rt, o)
}

/// `‖R Rᵀ − I‖_F` on a tape.
pub fn orthogonality_penalty(g: &mut Graph, r: Var) -> Result<Var> {
    let k = g.value(r).rows();
    let rt = g.transpose(r)?;
    let rrt = g.matmul(r, rt)?;
    let mut eye = Tensor::zeros(&[k, k]);
    for i in 0..k {
        eye.data_mut()[i * k + i] = 1.0;
    }
    let eye = g.constant(eye);
    let d = g.sub(rrt, eye)?;
    let sq = g.mul(d, d)?;
    let s = g.sum(sq);
    Ok(g.sqrt(s))
}

/// `‖R Rᵀ − I‖_F` for rows of `R`.
pub fn orthogonality_value(rows: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in rows.iter().enumerate() {
            let d = ops::dot(a, b) - if i == j { 1.0 } else { 0.0 };
            s += d * d;
        }
    }
    s.sqrt()
}

/// `Σ_j max(0, 1 − w·u + w·u_j) + λ‖RRᵀ − I‖_F`, evaluated directly.
pub fn descriptor_loss_value(w: &[f64], u: &[f64], negatives: &[Vec<f64>], r: &[Vec<f64>], lambda: f64) -> f64 {
    let pos = ops::dot(w, u);
    let hinge: f64 = negatives.iter().map(|n| (1.0 - pos + ops::dot(w, n)).max(0.0)).sum();
    hinge + lambda * orthogonality_value(r)
}

/// Hinge reconstruction term for one scene on a tape.
pub fn hinge_term(g: &mut Graph, w: Var, u: &[f64], negatives: &[&[f64]]) -> Result<Var> {
    let d = u.len();
    let mut diff = Vec::with_capacity(negatives.len() * d);
    for n in negatives {
        diff.extend(n.iter().zip(u).map(|(a, b)| a - b));
    }
    let m = g.constant(Tensor::matrix(negatives.len(), d, diff)?);
    let s = g.matmul(m, w)?;
    let one = g.constant(Tensor::vector(vec![1.0; negatives.len()]));
    let s = g.add(s, one)?;
    let h = g.relu(s);
    Ok(g.sum(h))
}

/// Per-script training data: predictor inputs `v_t` and targets `u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorData {
    pub title: String,
    pub v: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorModel {
    pub config: DescriptorConfig,
    pub predictor: Predictor,
    pub r: ParamId,
    pub dim: usize,
}

impl DescriptorModel {
    /// Register the predictor and descriptor matrix. `r_init` rows are
    /// the initial descriptors.
    pub fn new<R: Rng>(
        config: DescriptorConfig,
        input_dim: usize,
        r_init: &[Vec<f64>],
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        if r_init.len() != config.k || r_init.is_empty() {
            return Err(Error::Config(format!("expected {} descriptor rows, got {}", config.k, r_init.len())));
        }
        let dim = r_init[0].len();
        let predictor = Predictor::new(store, input_dim, config.hidden, config.k, config.recurrent, config.alpha, rng);
        let r = store.add("descriptors", Tensor::matrix(config.k, dim, r_init.concat())?);
        Ok(Self {
            config,
            predictor,
            r,
            dim,
        })
    }

    pub fn descriptors(&self, store: &ParamStore) -> Vec<Vec<f64>> {
        let t = store.value(self.r);
        (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
    }

    pub fn orthogonality(&self, store: &ParamStore) -> f64 {
        orthogonality_value(&self.descriptors(store))
    }

    /// Weight vectors for every scene, in order.
    pub fn weights(&self, g: &mut Graph, store: &ParamStore, vs: &[Vec<f64>]) -> Result<Vec<Var>> {
        let mut out = Vec::with_capacity(vs.len());
        let mut prev = None;
        for v in vs {
            let x = g.constant(Tensor::vector(v.clone()));
            let o = self.predictor.predict(g, store, x, prev)?;
            out.push(o);
            prev = Some(o);
        }
        Ok(out)
    }

    pub fn scene_weights(&self, store: &ParamStore, vs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let os = self.weights(&mut g, store, vs)?;
        Ok(os.iter().map(|&o| g.value(o).data().to_vec()).collect())
    }

    /// Mean hinge loss over scenes plus the orthogonality penalty.
    /// `negatives[t]` lists scene indices used as negatives for scene `t`.
    pub fn script_loss(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        data: &DescriptorData,
        negatives: &[Vec<usize>],
    ) -> Result<(Var, Vec<Var>)> {
        if data.v.is_empty() {
            return Err(Error::EmptyScript);
        }
        let os = self.weights(g, store, &data.v)?;
        let r = g.param(store, self.r);
        let mut terms = Vec::with_capacity(os.len());
        for (t, &o) in os.iter().enumerate() {
            let w = reconstruct(g, r, o)?;
            let negs: Vec<&[f64]> = negatives[t].iter().map(|&j| data.u[j].as_slice()).collect();
            terms.push(hinge_term(g, w, &data.u[t], &negs)?);
        }
        let stacked = g.stack(&terms)?;
        let hinge = g.mean(stacked);
        let pen = orthogonality_penalty(g, r)?;
        let pen = g.scale(pen, self.config.lambda);
        Ok((g.add(hinge, pen)?, os))
    }
}

/// Draw `n` distinct scene indices other than `t` from `0..len`.
pub fn sample_negatives<R: Rng>(rng: &mut R, t: usize, len: usize, n: usize) -> Vec<usize> {
    sample(rng, len - 1, n)
        .into_iter()
        .map(|j| if j >= t { j + 1 } else { j })
        .collect()
}

/// Number of negatives usable for a script, reduced when it has fewer
/// than `n + 1` scenes.
pub fn negatives_for(title: &str, scenes: usize, n: usize) -> Result<usize> {
    if scenes < 2 {
        return Err(Error::ScriptTooSmall { scenes, needed: 2 });
    }
    if scenes < n + 1 {
        warn!("{title}: {scenes} scenes, using {} negatives instead of {n}", scenes - 1);
        return Ok(scenes - 1);
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub orthogonality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorLog {
    pub initial_orthogonality: f64,
    pub epochs: Vec<DescriptorEpoch>,
    /// Largest `|Σ o_t − 1|` seen during training.
    pub max_simplex_error: f64,
    /// Smallest entry of any `o_t` seen during training.
    pub min_weight: f64,
    pub steps: usize,
    pub skipped: Vec<String>,
}

/// Train descriptors and predictor with Adam, one script per step.
pub fn train_descriptors(model: &DescriptorModel, store: &mut ParamStore, data: &[DescriptorData]) -> Result<DescriptorLog> {
    let cfg = &model.config;
    let mut usable = Vec::new();
    let mut skipped = Vec::new();
    for (i, d) in data.iter().enumerate() {
        match negatives_for(&d.title, d.v.len(), cfg.negatives) {
            Ok(n) => usable.push((i, n)),
            Err(Error::ScriptTooSmall { scenes, .. }) => {
                warn!("{}: {scenes} scene(s), skipped for descriptor training", d.title);
                skipped.push(d.title.clone());
            }
            Err(e) => return Err(e),
        }
    }
    if usable.is_empty() {
        return Err(Error::DataEmpty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut log = DescriptorLog {
        initial_orthogonality: model.orthogonality(store),
        epochs: Vec::new(),
        max_simplex_error: 0.0,
        min_weight: f64::INFINITY,
        steps: 0,
        skipped,
    };
    for epoch in 1..=cfg.epochs {
        use rand::seq::SliceRandom;
        usable.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, &(i, n)) in usable.iter().enumerate() {
            let d = &data[i];
            let negs: Vec<Vec<usize>> = (0..d.v.len())
                .map(|t| sample_negatives(&mut rng, t, d.v.len(), n))
                .collect();
            store.zero_grads();
            let mut g = Graph::new();
            let (loss, os) = model.script_loss(&mut g, store, d, &negs)?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            for &o in &os {
                let o = g.value(o).data();
                let s: f64 = o.iter().sum();
                log.max_simplex_error = log.max_simplex_error.max((s - 1.0).abs());
                log.min_weight = o.iter().copied().fold(log.min_weight, f64::min);
            }
            g.backward(loss)?;
            g.accumulate_param_grads(store);
            clip_grad_norm(store, cfg.max_norm);
            adam.step(store);
            total += value;
            log.steps += 1;
        }
        log.epochs.push(DescriptorEpoch {
            epoch,
            loss: total / usable.len() as f64,
            orthogonality: model.orthogonality(store),
        });
    }
    Ok(log)
}

/// Glorot-uniform `k × d` matrix in `±sqrt(6/(k+d))`.
pub fn glorot_descriptors<R: Rng>(k: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let limit = glorot_limit(k, d);
    (0..k)
        .map(|_| (0..d).map(|_| rng.gen_range(-limit..=limit)).collect())
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding, at most 100 iterations. An
/// empty cluster keeps its previous centroid.
pub fn kmeans<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if k == 0 || points.len() < k {
        return Err(Error::InsufficientVocab {
            have: points.len(),
            need: k,
        });
    }
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut x = rng.gen_range(0.0..total);
            let mut pick = d2.iter().rposition(|&v| v > 0.0).unwrap_or(0);
            for (i, &v) in d2.iter().enumerate() {
                if v > 0.0 && x < v {
                    pick = i;
                    break;
                }
                x -= v;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    let dim = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centroids[a]).total_cmp(&sq_dist(p, &centroids[b])))
                .expect("k > 0");
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(centroids)
}

pub fn init_descriptors<R: Rng>(mode: InitMode, vocab_vectors: &[Vec<f64>], k: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    match mode {
        InitMode::Kmeans => kmeans(vocab_vectors, k, rng),
        InitMode::RandomGlorot => {
            let d = vocab_vectors
                .first()
                .map(Vec::len)
                .ok_or(Error::InsufficientVocab { have: 0, need: 1 })?;
            Ok(glorot_descriptors(k, d, rng))
        }
    }
}

/// Token ids occurring in at least `min_docs` scripts that are not among
/// the `exclude_top` most frequent tokens. `skip` ids (such as the
/// unknown token) never qualify.
pub fn descriptor_vocab(counts: &[u64], doc_freq: &[u64], min_docs: u64, exclude_top: usize, skip: &[u32]) -> Vec<u32> {
    let mut by_freq: Vec<usize> = (0..counts.len()).collect();
    by_freq.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let top: HashSet<usize> = by_freq.into_iter().take(exclude_top).collect();
    (0..counts.len())
        .filter(|&i| doc_freq[i] >= min_docs && !top.contains(&i) && !skip.contains(&(i as u32)))
        .map(|i| i as u32)
        .collect()
}

/// Top-`m` candidate words per descriptor by cosine similarity; ties go
/// to the lexicographically smaller token.
pub fn nearest_words(rows: &[Vec<f64>], candidates: &[(String, Vec<f64>)], m: usize) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let mut scored: Vec<(f64, &str)> = candidates.iter().map(|(w, v)| (ops::cosine(r, v), w.as_str())).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
            scored.into_iter().take(m).map(|(_, w)| w.to_string()).collect()
        })
        .collect()
}

/// Document sets for co-occurrence counts.
#[derive(Debug, Clone, Default)]
pub struct Cooccurrence {
    docs: Vec<HashSet<String>>,
}

impl Cooccurrence {
    pub fn new<I, D, S>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            docs: docs.into_iter().map(|d| d.into_iter().map(Into::into).collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn doc_freq(&self, w: &str) -> usize {
        self.docs.iter().filter(|d| d.contains(w)).count()
    }

    pub fn co_doc_freq(&self, a: &str, b: &str) -> usize {
        self.docs.iter().filter(|d| d.contains(a) && d.contains(b)).count()
    }
}

/// `Σ_{m≥2} Σ_{l<m} log((D(w_m, w_l) + 1) / D(w_l))` over words in rank order.
pub fn semantic_coherence(words: &[String], index: &Cooccurrence) -> Result<f64> {
    let df: Vec<usize> = words.iter().map(|w| index.doc_freq(w)).collect();
    if let Some(i) = df.iter().position(|&d| d == 0) {
        return Err(Error::ZeroDocFrequency(words[i].clone()));
    }
    let mut total = 0.0;
    for m in 1..words.len() {
        for l in 0..m {
            let co = index.co_doc_freq(&words[m], &words[l]) as f64;
            total += ((co + 1.0) / df[l] as f64).ln();
        }
    }
    Ok(total)
}

/// Frozen scene encoder producing reconstruction targets: a BoE+Attn
/// model over all statements of a scene, applied to descriptor-vocabulary
/// words only.
#[derive(Debug, Clone)]
pub struct ReconstructionTarget {
    model: HierarchicalModel,
    store: ParamStore,
    allowed: HashSet<u32>,
}

impl ReconstructionTarget {
    pub fn config(word_dim: usize) -> ModelConfig {
        ModelConfig {
            word_dim,
            ..ModelConfig::new(EncoderKind::BoeAttn, Variant::Han)
        }
    }

    pub fn new(model: HierarchicalModel, store: ParamStore, allowed: impl IntoIterator<Item = u32>) -> Result<Self> {
        if model.config.kind != EncoderKind::BoeAttn || model.config.variant != Variant::Han {
            return Err(Error::Config("reconstruction target must be a BoE+Attn HAN model".into()));
        }
        Ok(Self {
            model,
            store,
            allowed: allowed.into_iter().collect(),
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    /// Unit-length target for a scene, or `None` when no descriptor
    /// word occurs in it.
    pub fn target(&self, emb: &EmbeddingTable, scene: &SceneInput) -> Result<Option<Vec<f64>>> {
        let statements: Vec<StatementInput> = scene
            .statements
            .iter()
            .filter_map(|s| {
                let tokens: Vec<u32> = s.tokens.iter().copied().filter(|t| self.allowed.contains(t)).collect();
                (!tokens.is_empty()).then_some(StatementInput {
                    channel: Channel::Action,
                    tokens,
                    character: None,
                })
            })
            .collect();
        if statements.is_empty() {
            return Ok(None);
        }
        let filtered = SceneInput {
            statements,
            characters: Vec::new(),
        };
        let mut g = Graph::new();
        let v = self.model.encode_scene(&mut g, &self.store, emb, &filtered)?;
        let u = g.value(v).data().to_vec();
        let n = ops::norm(&u);
        Ok((n > 0.0).then(|| u.iter().map(|x| x / n).collect()))
    }
}
