//! Narrative trajectories: smoothed, rescaled per-scene descriptor
//! weights, exported as CSV or as a streamgraph SVG.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centered moving average; windows are truncated at the edges.
pub fn smooth(raw: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::DomainError(format!("smoothing window must be odd and >= 1, got {window}")));
    }
    let half = window / 2;
    Ok((0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(raw.len());
            raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect())
}

/// Normalize each scene across the series so shares sum to 1. A scene
/// where every series is zero gets uniform shares. `series[j][t]` is
/// series `j` at scene `t`.
pub fn rescale(series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = series.first().map_or(0, Vec::len);
    let k = series.len();
    let mut out = vec![vec![0.0; n]; k];
    for t in 0..n {
        let total: f64 = series.iter().map(|s| s[t]).sum();
        for j in 0..k {
            out[j][t] = if total > 0.0 { series[j][t] / total } else { 1.0 / k as f64 };
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub descriptor: usize,
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub shares: Vec<f64>,
}

/// Build trajectories for `selected` descriptors from per-scene weight
/// vectors (`weights[t][k]`).
pub fn compute(weights: &[Vec<f64>], selected: &[usize], window: usize) -> Result<Vec<Trajectory>> {
    if selected.is_empty() {
        return Err(Error::Config("no descriptors selected".into()));
    }
    let k = weights.first().map_or(0, Vec::len);
    if let Some(&bad) = selected.iter().find(|&&j| j >= k) {
        return Err(Error::Config(format!("descriptor {bad} out of range (k = {k})")));
    }
    let raws: Vec<Vec<f64>> = selected.iter().map(|&j| weights.iter().map(|o| o[j]).collect()).collect();
    let smoothed = raws.iter().map(|r| smooth(r, window)).collect::<Result<Vec<_>>>()?;
    let shares = rescale(&smoothed);
    Ok(selected
        .iter()
        .zip(raws)
        .zip(smoothed)
        .zip(shares)
        .map(|(((&descriptor, raw), smoothed), shares)| Trajectory {
            descriptor,
            raw,
            smoothed,
            shares,
        })
        .collect())
}

/// Parse a descriptor selection: a comma list of indices or `top:m`
/// (the `m` descriptors with the highest mean weight, ties by index).
pub fn select(weights: &[Vec<f64>], spec: &str) -> Result<Vec<usize>> {
    let k = weights.first().map_or(0, Vec::len);
    if let Some(m) = spec.strip_prefix("top:") {
        let m: usize = m
            .parse()
            .map_err(|_| Error::Config(format!("bad descriptor selection {spec:?}")))?;
        let mut mean = vec![0.0; k];
        for o in weights {
            for (j, &w) in o.iter().enumerate() {
                mean[j] += w / weights.len() as f64;
            }
        }
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
        idx.truncate(m.min(k));
        idx.sort_unstable();
        return Ok(idx);
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad descriptor selection {spec:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

/// A labelled event marker at a scene (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub scene: usize,
    pub label: String,
}

impl FromStr for Annotation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (scene, label) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("annotation must be scene:LABEL, got {s:?}")))?;
        Ok(Self {
            scene: scene
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad annotation scene {scene:?}")))?,
            label: label.to_string(),
        })
    }
}

/// `scene,descriptor_<i>,...` with one row of shares per scene.
pub fn to_csv(trajs: &[Trajectory]) -> String {
    let mut out = String::from("scene");
    for t in trajs {
        let _ = write!(out, ",descriptor_{}", t.descriptor);
    }
    out.push('\n');
    let n = trajs.first().map_or(0, |t| t.shares.len());
    for s in 0..n {
        let _ = write!(out, "{s}");
        for t in trajs {
            let _ = write!(out, ",{}", t.shares[s]);
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`to_csv`]: descriptor indices and `shares[t][j]`.
pub fn parse_csv(text: &str) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let err = |line: usize, message: String| Error::Parse {
        source_name: "trajectory csv".into(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let mut cols = header.split(',');
    if cols.next() != Some("scene") {
        return Err(err(1, "missing scene column".into()));
    }
    let descriptors = cols
        .map(|c| {
            c.strip_prefix("descriptor_")
                .and_then(|i| i.parse().ok())
                .ok_or_else(|| err(1, format!("bad column {c:?}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let rows = lines
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|e| err(i + 2, e.to_string())))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((descriptors, rows))
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 40.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

/// Horizontal position of scene `s` out of `n`.
pub fn scene_x(s: usize, n: usize) -> f64 {
    let w = WIDTH - LEFT - RIGHT;
    if n <= 1 {
        LEFT + w / 2.0
    } else {
        LEFT + w * s as f64 / (n - 1) as f64
    }
}

fn value_y(v: f64) -> f64 {
    let h = HEIGHT - TOP - BOTTOM;
    TOP + h / 2.0 - v * h
}

/// Layer order from the middle outward: layers peaking earliest sit in
/// the center, later ones alternate above and below.
fn inside_out(trajs: &[Trajectory]) -> Vec<usize> {
    let peak = |t: &Trajectory| {
        t.shares
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0
    };
    let mut by_peak: Vec<usize> = (0..trajs.len()).collect();
    by_peak.sort_by_key(|&i| (peak(&trajs[i]), i));
    let (mut top, mut bottom) = (Vec::new(), Vec::new());
    for (n, i) in by_peak.into_iter().enumerate() {
        if n % 2 == 0 {
            top.push(i);
        } else {
            bottom.push(i);
        }
    }
    bottom.reverse();
    bottom.extend(top);
    bottom
}

/// Streamgraph of the shares with a symmetric baseline, one labelled
/// region per descriptor and lettered event markers.
pub fn to_svg(trajs: &[Trajectory], annotations: &[Annotation], names: &[String]) -> String {
    let n = trajs.first().map_or(0, |t| t.shares.len());
    let order = inside_out(trajs);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    // silhouette baseline: the stack is centred on zero
    let mut lower: Vec<f64> = (0..n)
        .map(|s| -0.5 * trajs.iter().map(|t| t.shares[s]).sum::<f64>())
        .collect();
    for &li in &order {
        let t = &trajs[li];
        let upper: Vec<f64> = lower.iter().zip(&t.shares).map(|(l, v)| l + v).collect();
        let mut d = String::new();
        for s in 0..n {
            let _ = write!(d, "{}{:.3},{:.3} ", if s == 0 { "M" } else { "L" }, scene_x(s, n), value_y(upper[s]));
        }
        for s in (0..n).rev() {
            let _ = write!(d, "L{:.3},{:.3} ", scene_x(s, n), value_y(lower[s]));
        }
        d.push('Z');
        let color = PALETTE[t.descriptor % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<path class="layer" data-descriptor="{}" d="{d}" fill="{color}" stroke="white" stroke-width="0.5"/>"#,
            t.descriptor
        );
        if n > 0 {
            let (ps, _) = t
                .shares
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
            let mid = (upper[ps] + lower[ps]) / 2.0;
            let name = names.get(li).cloned().unwrap_or_else(|| format!("descriptor {}", t.descriptor));
            let _ = writeln!(
                out,
                r#"<text class="region-label" x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
                scene_x(ps, n),
                value_y(mid),
                escape(&name)
            );
        }
        lower = upper;
    }
    for (i, a) in annotations.iter().enumerate() {
        let letter = marker_letter(i);
        let x = scene_x(a.scene, n);
        let _ = writeln!(
            out,
            r#"<line class="marker" data-scene="{}" x1="{x:.3}" y1="{TOP:.3}" x2="{x:.3}" y2="{:.3}" stroke="black" stroke-dasharray="3,3"/>"#,
            a.scene,
            HEIGHT - BOTTOM
        );
        let _ = writeln!(out, r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle" font-weight="bold">{letter}</text>"#, TOP - 8.0);
        let _ = writeln!(
            out,
            r#"<text class="legend" x="{LEFT:.3}" y="{:.3}">({letter}) {}</text>"#,
            HEIGHT - BOTTOM + 20.0 + 14.0 * i as f64,
            escape(&a.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn marker_letter(i: usize) -> String {
    let mut s = String::new();
    let mut i = i + 1;
    while i > 0 {
        i -= 1;
        s.insert(0, (b'A' + (i % 26) as u8) as char);
        i /= 26;
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
