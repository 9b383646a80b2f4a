//! Multi-label tag prediction: the linear head, the class-reweighted
//! binary cross-entropy, micro-averaged precision for model selection,
//! the training loop with early stopping, and the logline baseline.

use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{DocumentEncoder, EmbeddingTable};
use crate::error::{Error, Result};
use crate::tensor::{clip_grad_norm, ops, Adam, AdamConfig, BiGru, Graph, ParamId, ParamStore, Tensor, Var};

/// Binary script × tag matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols || r.iter().any(|&v| v > 1)) {
            return Err(Error::Config("label rows must be equal-length 0/1 vectors".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.cols + j] = u8::from(v);
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn column_sum(&self, j: usize) -> usize {
        (0..self.rows).map(|i| self.get(i, j) as usize).sum()
    }

    /// Keep only the listed columns.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                out.set(i, k, self.get(i, j) == 1);
            }
        }
        out
    }
}

/// One tag attribute: ordered tag values and per-tag negative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagTaxonomy {
    pub attribute: String,
    pub tags: Vec<String>,
    /// Ratio of positive to negative training scripts per tag.
    pub lambda: Vec<f64>,
    /// Tags with both positives and negatives in training.
    pub active: Vec<bool>,
}

impl TagTaxonomy {
    /// Derive `λ_j = positives / negatives` from training labels. Tags
    /// lacking positives or negatives are inactive (λ = 0).
    pub fn from_labels(attribute: impl Into<String>, tags: Vec<String>, train: &LabelMatrix) -> Self {
        let attribute = attribute.into();
        let mut lambda = Vec::with_capacity(tags.len());
        let mut active = Vec::with_capacity(tags.len());
        for (j, tag) in tags.iter().enumerate() {
            let pos = train.column_sum(j);
            let neg = train.rows() - pos;
            if pos == 0 || neg == 0 {
                warn!(
                    "attribute {attribute}: tag {tag:?} has {pos} positive and {neg} negative training scripts; excluded from loss and F1"
                );
                lambda.push(0.0);
                active.push(false);
            } else {
                lambda.push(pos as f64 / neg as f64);
                active.push(true);
            }
        }
        Self {
            attribute,
            tags,
            lambda,
            active,
        }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.tags.len()).filter(|&j| self.active[j]).collect()
    }
}

/// Which form of the weighted loss to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    /// `−(1/NL) Σ [y log σ(z) + λ (1−y) log(1−σ(z))]`.
    #[default]
    Weighted,
    /// `(1/NL) Σ [y log σ(z) + λ (1−y)(1 − log σ(z))]`, kept for
    /// comparison only; it is unbounded below.
    Printed,
}

fn check_loss_shapes(z_len: usize, y: &[u8], lambda: &[f64], active: &[bool]) -> Result<usize> {
    let l = lambda.len();
    if l == 0 || active.len() != l || y.len() != z_len || !z_len.is_multiple_of(l) {
        return Err(Error::ShapeMismatch {
            op: "reweighted_loss",
            left: vec![z_len],
            right: vec![y.len(), l],
        });
    }
    let n_active = active.iter().filter(|&&a| a).count();
    if n_active == 0 {
        return Err(Error::DataEmpty);
    }
    Ok(z_len / l * n_active)
}

/// Loss value without a tape. `z` and `y` are row-major `N × L`.
pub fn reweighted_loss_value(z: &[f64], y: &[u8], lambda: &[f64], active: &[bool], form: LossForm) -> Result<f64> {
    let denom = check_loss_shapes(z.len(), y, lambda, active)? as f64;
    let l = lambda.len();
    let mut total = 0.0;
    for (idx, (&zi, &yi)) in z.iter().zip(y).enumerate() {
        let j = idx % l;
        if !active[j] {
            continue;
        }
        let yf = f64::from(yi);
        total += match form {
            LossForm::Weighted => {
                yf * ops::log_sigmoid(zi) + lambda[j] * (1.0 - yf) * ops::log_sigmoid(-zi)
            }
            LossForm::Printed => {
                yf * ops::log_sigmoid(zi) + lambda[j] * (1.0 - yf) * (1.0 - ops::log_sigmoid(zi))
            }
        };
    }
    Ok(match form {
        LossForm::Weighted => -total / denom,
        LossForm::Printed => total / denom,
    })
}

/// Positive and negative parts of the weighted loss, whose sum is
/// [`reweighted_loss_value`] with [`LossForm::Weighted`].
pub fn loss_parts(z: &[f64], y: &[u8], lambda: &[f64], active: &[bool]) -> Result<(f64, f64)> {
    let denom = check_loss_shapes(z.len(), y, lambda, active)? as f64;
    let l = lambda.len();
    let (mut pos, mut neg) = (0.0, 0.0);
    for (idx, (&zi, &yi)) in z.iter().zip(y).enumerate() {
        let j = idx % l;
        if !active[j] {
            continue;
        }
        if yi == 1 {
            pos -= ops::log_sigmoid(zi);
        } else {
            neg -= lambda[j] * ops::log_sigmoid(-zi);
        }
    }
    Ok((pos / denom, neg / denom))
}

/// The weighted loss on a tape. `z` holds `N × L` logits.
pub fn reweighted_loss(
    g: &mut Graph,
    z: Var,
    y: &[u8],
    lambda: &[f64],
    active: &[bool],
    form: LossForm,
) -> Result<Var> {
    let z_len = g.value(z).len();
    let denom = check_loss_shapes(z_len, y, lambda, active)? as f64;
    let l = lambda.len();
    let mut pos_coef = Vec::with_capacity(z_len);
    let mut neg_coef = Vec::with_capacity(z_len);
    for (idx, &yi) in y.iter().enumerate() {
        let j = idx % l;
        let on = if active[j] { 1.0 } else { 0.0 };
        let yf = f64::from(yi);
        pos_coef.push(on * yf);
        neg_coef.push(on * lambda[j] * (1.0 - yf));
    }
    let shape = g.value(z).shape().to_vec();
    let pc = g.constant(Tensor::new(shape.clone(), pos_coef)?);
    let nc = g.constant(Tensor::new(shape, neg_coef.clone())?);
    let ls = g.log_sigmoid(z);
    let pos = g.mul(pc, ls)?;
    let pos = g.sum(pos);
    let neg_term = match form {
        LossForm::Weighted => {
            let nz = g.scale(z, -1.0);
            g.log_sigmoid(nz)
        }
        LossForm::Printed => g.scale(ls, -1.0),
    };
    let neg = g.mul(nc, neg_term)?;
    let mut neg = g.sum(neg);
    let total = match form {
        LossForm::Weighted => {
            let t = g.add(pos, neg)?;
            g.scale(t, -1.0 / denom)
        }
        LossForm::Printed => {
            // λ(1−y)(1 − log σ) = λ(1−y) + λ(1−y)(−log σ)
            let c: f64 = neg_coef.iter().sum();
            let cst = g.constant(Tensor::scalar(c));
            neg = g.add(neg, cst)?;
            let t = g.add(pos, neg)?;
            g.scale(t, 1.0 / denom)
        }
    };
    Ok(total)
}

/// Binarize logits: tag `j` is predicted iff `σ(z_j) > threshold`.
pub fn predict_tags(logits: &[f64], threshold: f64) -> Vec<u8> {
    logits
        .iter()
        .map(|&z| u8::from(ops::sigmoid(z) > threshold))
        .collect()
}

/// Micro-averaged average precision over all (script, tag) decisions.
/// Tied scores are ranked as one threshold.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "average_precision",
            left: vec![scores.len()],
            right: vec![labels.len()],
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += labels[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// Linear map from document embedding to one logit per tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub w: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub n_tags: usize,
}

impl ClassifierHead {
    pub fn new<R: Rng>(store: &mut ParamStore, input_dim: usize, n_tags: usize, rng: &mut R) -> Self {
        Self {
            w: store.add_glorot("head.w", &[n_tags, input_dim], None, rng),
            b: store.add_zeros("head.b", &[n_tags]),
            input_dim,
            n_tags,
        }
    }

    pub fn logits(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let wx = g.matmul(w, x)?;
        g.add(wx, b)
    }
}

/// Bidirectional GRU over logline tokens, final states concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct LoglineEncoder {
    gru: BiGru,
    word_dim: usize,
}

impl LoglineEncoder {
    pub fn new<R: Rng>(store: &mut ParamStore, word_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            gru: BiGru::new(store, "logline.gru", word_dim, hidden, rng),
            word_dim,
        }
    }
}

impl DocumentEncoder for LoglineEncoder {
    type Input = Vec<u32>;

    fn output_dim(&self) -> usize {
        self.gru.output_dim()
    }

    fn encode(&self, g: &mut Graph, store: &ParamStore, emb: &EmbeddingTable, input: &Vec<u32>) -> Result<Var> {
        if input.is_empty() {
            return Err(Error::EmptyStatement);
        }
        if emb.dim() != self.word_dim {
            return Err(Error::EmbeddingDimMismatch {
                expected: self.word_dim,
                found: emb.dim(),
                context: "logline embeddings".into(),
            });
        }
        let xs = g.constant(emb.lookup(input));
        Ok(self.gru.run(g, store, xs)?.final_state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_norm: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub threshold: f64,
    pub seed: u64,
    pub loss: LossForm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            max_norm: 5.0,
            max_epochs: 20,
            patience: 5,
            threshold: 0.5,
            seed: 0,
            loss: LossForm::Weighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ap: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_ap: f64,
    pub stopped_epoch: usize,
}

/// Render the training log as CSV. Wallclock seconds are written only
/// when `with_wallclock` is set so that logs are otherwise reproducible.
pub fn log_csv(log: &[EpochLog], with_wallclock: bool) -> String {
    let mut out = String::from("epoch,train_loss,val_AP,lr,wallclock\n");
    for e in log {
        let wall = if with_wallclock {
            format!("{:.3}", e.seconds)
        } else {
            String::new()
        };
        out.push_str(&format!("{},{:.12},{:.12},{},{}\n", e.epoch, e.train_loss, e.val_ap, e.lr, wall));
    }
    out
}

/// An encoder with its classification head.
pub struct Tagger<'a, E: DocumentEncoder> {
    pub encoder: &'a E,
    pub head: &'a ClassifierHead,
    pub embeddings: &'a EmbeddingTable,
}

impl<E: DocumentEncoder> Tagger<'_, E> {
    pub fn logits(&self, store: &ParamStore, input: &E::Input) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let x = self.encoder.encode(&mut g, store, self.embeddings, input)?;
        let z = self.head.logits(&mut g, store, x)?;
        Ok(g.value(z).data().to_vec())
    }

    /// Loss, logits and (when `backward`) accumulated parameter gradients
    /// for one document.
    fn step(
        &self,
        store: &mut ParamStore,
        input: &E::Input,
        y: &[u8],
        tax: &TagTaxonomy,
        form: LossForm,
        backward: bool,
    ) -> Result<(f64, Vec<f64>)> {
        let mut g = Graph::new();
        let x = self.encoder.encode(&mut g, store, self.embeddings, input)?;
        let z = self.head.logits(&mut g, store, x)?;
        let loss = reweighted_loss(&mut g, z, y, &tax.lambda, &tax.active, form)?;
        let value = g.value(loss).item();
        if backward && value.is_finite() {
            g.backward(loss)?;
            g.accumulate_param_grads(store);
        }
        Ok((value, g.value(z).data().to_vec()))
    }

    /// Micro AP and mean loss over a labelled set, active tags only.
    pub fn evaluate(
        &self,
        store: &mut ParamStore,
        data: &[(E::Input, Vec<u8>)],
        tax: &TagTaxonomy,
        form: LossForm,
    ) -> Result<(f64, f64)> {
        let active = tax.active_indices();
        let (mut scores, mut labels, mut loss) = (Vec::new(), Vec::new(), 0.0);
        for (input, y) in data {
            let (l, z) = self.step(store, input, y, tax, form, false)?;
            loss += l;
            for &j in &active {
                scores.push(z[j]);
                labels.push(y[j]);
            }
        }
        let ap = match average_precision(&scores, &labels) {
            Ok(ap) => ap,
            Err(Error::NoPositives) => {
                warn!("validation set has no positive labels; AP recorded as 0");
                0.0
            }
            Err(e) => return Err(e),
        };
        Ok((ap, loss / data.len().max(1) as f64))
    }

    /// Train with Adam, one document per step, gradient clipping and
    /// early stopping on validation AP (ties broken by lower validation
    /// loss). On return `store` holds the best parameters.
    pub fn train(
        &self,
        store: &mut ParamStore,
        train: &[(E::Input, Vec<u8>)],
        val: &[(E::Input, Vec<u8>)],
        tax: &TagTaxonomy,
        cfg: &TrainConfig,
    ) -> Result<TrainOutcome> {
        if train.is_empty() {
            return Err(Error::DataEmpty);
        }
        let val = if val.is_empty() {
            warn!("no validation scripts; selecting on the training set");
            train
        } else {
            val
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut adam = Adam::new(AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        });
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut log = Vec::new();
        let mut best: Option<(f64, f64, usize, ParamStore)> = None;
        let mut since_best = 0;
        let mut stopped_epoch = 0;
        let start = Instant::now();
        for epoch in 1..=cfg.max_epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (batch, &i) in order.iter().enumerate() {
                store.zero_grads();
                let (input, y) = &train[i];
                let (loss, _) = self.step(store, input, y, tax, cfg.loss, true)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch });
                }
                total += loss;
                clip_grad_norm(store, cfg.max_norm);
                adam.step(store);
            }
            let (val_ap, val_loss) = self.evaluate(store, val, tax, cfg.loss)?;
            let train_loss = total / train.len() as f64;
            info!("epoch {epoch}: train_loss={train_loss:.6} val_AP={val_ap:.4} val_loss={val_loss:.6}");
            log.push(EpochLog {
                epoch,
                train_loss,
                val_ap,
                val_loss,
                lr: cfg.lr,
                seconds: start.elapsed().as_secs_f64(),
            });
            stopped_epoch = epoch;
            let improved = match &best {
                None => true,
                Some((ap, vl, _, _)) => val_ap > *ap || (val_ap == *ap && val_loss < *vl),
            };
            if improved {
                best = Some((val_ap, val_loss, epoch, store.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    info!("early stop at epoch {epoch}");
                    break;
                }
            }
        }
        let (best_val_ap, _, best_epoch, params) = best.ok_or(Error::DataEmpty)?;
        store.load_values(&params)?;
        Ok(TrainOutcome {
            log,
            best_epoch,
            best_val_ap,
            stopped_epoch,
        })
    }
}
