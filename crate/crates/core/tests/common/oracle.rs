//! Independent reference computations, written out directly.

/// Plain mean binary cross-entropy.
pub fn bce(z: &[f64], y: &[u8]) -> f64 {
    let total: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| {
            let p = 1.0 / (1.0 + (-z).exp());
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / z.len() as f64
}

/// Average precision by brute force: precision at every distinct
/// threshold, weighted by the recall gained there.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut prev = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let sel: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = sel.iter().filter(|&&i| labels[i] == 1).count() as f64;
        let recall = tp / n_pos;
        ap += (recall - prev) * tp / sel.len() as f64;
        prev = recall;
    }
    ap
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Share of unordered distinct pairs strictly less similar than `(i, j)`.
pub fn percentile(vs: &[Vec<f64>], i: usize, j: usize) -> f64 {
    if i == j {
        return 100.0;
    }
    let s = cosine(&vs[i], &vs[j]);
    let (mut below, mut total) = (0, 0);
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            total += 1;
            if cosine(&vs[a], &vs[b]) < s {
                below += 1;
            }
        }
    }
    100.0 * below as f64 / total as f64
}

/// Exact-match micro-F1 from pooled counts.
pub fn exact_f1(pred: &[Vec<u8>], gold: &[Vec<u8>]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        for (&a, &b) in p.iter().zip(g) {
            match (a, b) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => fn_ += 1,
                _ => {}
            }
        }
    }
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// `2^H` of a distribution given as counts.
pub fn perplexity(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum();
    2f64.powf(h)
}
