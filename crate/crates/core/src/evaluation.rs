//! Multi-label F1, similarity-thresholded F1 and the taxonomy analyses
//! (equivalence merging, tag perplexity, pair permutations).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::LabelMatrix;
use crate::error::{Error, Result};
use crate::tensor::ops;

fn check_aligned(pred: &LabelMatrix, gold: &LabelMatrix) -> Result<()> {
    if pred.rows() != gold.rows() || pred.cols() != gold.cols() {
        return Err(Error::ShapeMismatch {
            op: "f1",
            left: vec![pred.rows(), pred.cols()],
            right: vec![gold.rows(), gold.cols()],
        });
    }
    Ok(())
}

/// Pooled counts over (script, tag) decisions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    /// `2PR/(P+R)` in count form, `2TP/(2TP+FP+FN)`; 0 without a TP.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / (2 * self.tp + self.fp + self.fn_) as f64
        }
    }
}

pub fn exact_counts(pred: &LabelMatrix, gold: &LabelMatrix) -> Result<Counts> {
    check_aligned(pred, gold)?;
    let mut c = Counts::default();
    for (&p, &g) in pred.data().iter().zip(gold.data()) {
        match (p, g) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 1) => c.fn_ += 1,
            _ => {}
        }
    }
    Ok(c)
}

/// Micro-averaged F1 over all (script, tag) pairs of one attribute.
pub fn micro_f1(pred: &LabelMatrix, gold: &LabelMatrix) -> Result<f64> {
    Ok(exact_counts(pred, gold)?.f1())
}

/// Tag vectors of one attribute with their pairwise cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct TagEmbeddingSpace {
    pub attribute: String,
    tags: Vec<String>,
    vectors: Vec<Vec<f64>>,
    sim: Vec<f64>,
    /// Similarities of all unordered distinct pairs, ascending.
    sorted: Vec<f64>,
}

impl TagEmbeddingSpace {
    pub fn new(attribute: impl Into<String>, tags: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if tags.len() != vectors.len() || tags.is_empty() {
            return Err(Error::Config("tag embedding space needs one vector per tag".into()));
        }
        let dim = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::EmbeddingDimMismatch {
                expected: dim,
                found: v.len(),
                context: "tag embeddings".into(),
            });
        }
        let n = tags.len();
        let mut sim = vec![0.0; n * n];
        let mut sorted = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            sim[i * n + i] = 1.0;
            for j in i + 1..n {
                let s = ops::cosine(&vectors[i], &vectors[j]);
                sim[i * n + j] = s;
                sim[j * n + i] = s;
                sorted.push(s);
            }
        }
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            attribute: attribute.into(),
            tags,
            vectors,
            sim,
            sorted,
        })
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index(&self, tag: &str) -> Result<usize> {
        self.tags
            .iter()
            .position(|t| t == tag)
            .ok_or_else(|| Error::UnknownTag(format!("{}:{tag}", self.attribute)))
    }

    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.sim[i * self.tags.len() + j]
    }

    /// Cosine distance `1 − cos`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            1.0 - self.similarity(i, j)
        }
    }

    /// Percentile of a pair's similarity among all distinct pairs: the
    /// share of pairs strictly less similar. A tag paired with itself is
    /// at 100.
    pub fn percentile(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 100.0;
        }
        let s = self.similarity(i, j);
        let below = self.sorted.partition_point(|&x| x < s);
        100.0 * below as f64 / self.sorted.len() as f64
    }

    pub fn similarity_percentile(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.percentile(self.index(a)?, self.index(b)?))
    }

    /// The same space with tags in the given order.
    pub fn reorder(&self, tags: &[String]) -> Result<Self> {
        let vectors = tags
            .iter()
            .map(|t| Ok(self.vectors[self.index(t)?].clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.attribute.clone(), tags.to_vec(), vectors)
    }

    /// Ordered pairs of distinct tags whose percentile is below `cutoff`.
    pub fn pairs_below(&self, cutoff: f64) -> usize {
        let n = self.tags.len();
        let mut p = 0;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.percentile(i, j) < cutoff {
                    p += 1;
                }
            }
        }
        p
    }
}

/// Read `attribute<TAB>tag<TAB>floats` lines into one space per attribute.
/// The floats may be separated by tabs or spaces.
pub fn read_tag_embeddings(path: &Path) -> Result<BTreeMap<String, TagEmbeddingSpace>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tag_embeddings(&text, &path.display().to_string())
}

pub fn parse_tag_embeddings(text: &str, source_name: &str) -> Result<BTreeMap<String, TagEmbeddingSpace>> {
    let mut raw: BTreeMap<String, (Vec<String>, Vec<Vec<f64>>)> = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line: no + 1,
            message,
        };
        let mut parts = line.splitn(3, '\t');
        let (Some(attr), Some(tag), Some(rest)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected attribute, tag and vector".into()));
        };
        let v = rest
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|e| err(format!("bad float {x:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let entry = raw.entry(attr.to_string()).or_default();
        entry.0.push(tag.to_string());
        entry.1.push(v);
    }
    raw.into_iter()
        .map(|(attr, (tags, vecs))| Ok((attr.clone(), TagEmbeddingSpace::new(attr, tags, vecs)?)))
        .collect()
}

/// Counts with prediction/gold pairs matched one-to-one. Candidate pairs
/// are visited from most to least similar (identical tags first) and a
/// pair is taken when both sides are still free and its percentile is at
/// least `cutoff`. Lowering the cutoff only appends candidates, so the
/// matching at a higher cutoff is kept and TP never decreases.
pub fn similarity_counts(
    pred: &LabelMatrix,
    gold: &LabelMatrix,
    space: &TagEmbeddingSpace,
    cutoff: f64,
) -> Result<Counts> {
    check_aligned(pred, gold)?;
    if space.len() != pred.cols() {
        return Err(Error::ShapeMismatch {
            op: "similarity_f1",
            left: vec![pred.cols()],
            right: vec![space.len()],
        });
    }
    if !(0.0..=100.0).contains(&cutoff) {
        return Err(Error::DomainError(format!("cutoff {cutoff} outside [0, 100]")));
    }
    let l = pred.cols();
    let mut c = Counts::default();
    for r in 0..pred.rows() {
        let ps: Vec<usize> = (0..l).filter(|&j| pred.get(r, j) == 1).collect();
        let gs: Vec<usize> = (0..l).filter(|&j| gold.get(r, j) == 1).collect();
        let mut cands = Vec::new();
        for &p in &ps {
            for &g in &gs {
                let pct = space.percentile(p, g);
                if pct >= cutoff {
                    cands.push((pct, space.similarity(p, g), p, g));
                }
            }
        }
        cands.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(b.1.total_cmp(&a.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        let (mut p_used, mut g_used) = (vec![false; l], vec![false; l]);
        let mut tp = 0;
        for (_, _, p, g) in cands {
            if !p_used[p] && !g_used[g] {
                p_used[p] = true;
                g_used[g] = true;
                tp += 1;
            }
        }
        c.tp += tp;
        c.fp += ps.len() - tp;
        c.fn_ += gs.len() - tp;
    }
    Ok(c)
}

pub fn similarity_f1(pred: &LabelMatrix, gold: &LabelMatrix, space: &TagEmbeddingSpace, cutoff: f64) -> Result<f64> {
    Ok(similarity_counts(pred, gold, space, cutoff)?.f1())
}

/// Partition of an attribute's tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceClasses {
    /// Class index of each tag.
    pub class_of: Vec<usize>,
    /// Members of each class, ascending; classes ordered by first member.
    pub classes: Vec<Vec<usize>>,
}

impl EquivalenceClasses {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Sum per-tag counts into per-class counts.
    pub fn aggregate(&self, counts: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.classes.len()];
        for (t, &c) in counts.iter().enumerate() {
            out[self.class_of[t]] += c;
        }
        out
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Join every pair at or above `cutoff` and take the transitive closure.
pub fn merge_equivalents(space: &TagEmbeddingSpace, cutoff: f64) -> EquivalenceClasses {
    let n = space.len();
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        for j in i + 1..n {
            if space.percentile(i, j) >= cutoff {
                uf.union(i, j);
            }
        }
    }
    let mut root_class = BTreeMap::new();
    let mut class_of = vec![0; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (t, slot) in class_of.iter_mut().enumerate() {
        let r = uf.find(t);
        let k = *root_class.entry(r).or_insert_with(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[k].push(t);
        *slot = k;
    }
    EquivalenceClasses { class_of, classes }
}

/// `2^H` of a probability vector, with `0 log 0 = 0`.
pub fn tag_perplexity(probs: &[f64]) -> Result<f64> {
    let total: f64 = probs.iter().sum();
    if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("sum {total}")));
    }
    let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    Ok(h.exp2())
}

/// Perplexity of the distribution proportional to `counts`.
pub fn perplexity_from_counts(counts: &[f64]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution("no tag occurrences".into()));
    }
    let probs: Vec<f64> = counts.iter().map(|c| c / total).collect();
    tag_perplexity(&probs)
}

/// Ordered pairs of distinct tags, `n(n−1)`.
pub fn pair_permutations(n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::DomainError(format!("pair permutations need n >= 2, got {n}")));
    }
    Ok(n * (n - 1))
}

/// Positive root of `n² − n − p = 0`.
pub fn cardinality_from_permutations(p: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * p).sqrt()) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffRow {
    pub cutoff: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub classes: usize,
    pub perplexity: f64,
    pub perplexity_reduction: f64,
    /// Estimated from the pairs that remain distinguishable below the cutoff.
    pub cardinality: f64,
    pub cardinality_reduction: f64,
}

/// F1 and taxonomy statistics at each cutoff. `tag_counts` are corpus
/// occurrences per tag, in the space's order.
pub fn cutoff_sweep(
    pred: &LabelMatrix,
    gold: &LabelMatrix,
    space: &TagEmbeddingSpace,
    tag_counts: &[f64],
    cutoffs: &[f64],
) -> Result<Vec<CutoffRow>> {
    let n = space.len() as f64;
    let base = perplexity_from_counts(tag_counts)?;
    cutoffs
        .iter()
        .map(|&cutoff| {
            let c = similarity_counts(pred, gold, space, cutoff)?;
            let classes = merge_equivalents(space, cutoff);
            let perplexity = perplexity_from_counts(&classes.aggregate(tag_counts))?;
            let cardinality = if space.len() < 2 {
                n
            } else {
                cardinality_from_permutations(space.pairs_below(cutoff) as f64)
            };
            Ok(CutoffRow {
                cutoff,
                f1: c.f1(),
                precision: c.precision(),
                recall: c.recall(),
                classes: classes.len(),
                perplexity,
                perplexity_reduction: 1.0 - perplexity / base,
                cardinality,
                cardinality_reduction: 1.0 - cardinality / n,
            })
        })
        .collect()
}
