//! Confusion matrices, per-class metrics, the multi-model leaderboard and
//! the SVG heatmap.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::models::{predict_batch, train, ModelKind, ModelSpec, TrainedModel};
use crate::rng::derive_seed;
use crate::synth::EventClass;

const K: usize = EventClass::COUNT;

/// Rows are true classes, columns predicted classes, both by class code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; K]; K],
}

/// An unordered class pair and its total off-diagonal count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusedPair {
    pub a: EventClass,
    pub b: EventClass,
    pub count: u64,
}

impl ConfusedPair {
    pub fn is(&self, x: EventClass, y: EventClass) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }
}

impl ConfusionMatrix {
    pub fn zeros() -> Self {
        Self { counts: [[0; K]; K] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    /// Unordered pairs with nonzero confusion, largest first; equal counts
    /// keep class-code order.
    pub fn confused_pairs(&self) -> Vec<ConfusedPair> {
        let mut pairs = Vec::new();
        for i in 0..K {
            for j in i + 1..K {
                let count = self.counts[i][j] + self.counts[j][i];
                if count > 0 {
                    pairs.push(ConfusedPair {
                        a: EventClass::ALL[i],
                        b: EventClass::ALL[j],
                        count,
                    });
                }
            }
        }
        pairs.sort_by_key(|p| std::cmp::Reverse(p.count));
        pairs
    }

    pub fn top_pair(&self) -> Option<ConfusedPair> {
        self.confused_pairs().into_iter().next()
    }
}

pub fn confusion(y_true: &[EventClass], y_pred: &[EventClass]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut m = ConfusionMatrix::zeros();
    for (t, p) in y_true.iter().zip(y_pred) {
        m.counts[t.code()][p.code()] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Indexed by class code.
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(conf: &ConfusionMatrix) -> Result<Metrics> {
    let total = conf.total();
    if total == 0 {
        return Err(Error::invalid("metrics of an empty confusion matrix"));
    }
    let per_class = (0..K)
        .map(|c| {
            let tp = conf.counts[c][c];
            let precision = ratio(tp, conf.col_sum(c));
            let recall = ratio(tp, conf.row_sum(c));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics { precision, recall, f1 }
        })
        .collect();
    Ok(Metrics {
        accuracy: ratio(conf.trace(), total),
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub top_pair: Option<ConfusedPair>,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub train_digest: Option<String>,
    pub test_digest: String,
}

/// 64-bit content hash (leading bytes of SHA-256) as 16 hex digits.
pub fn content_digest(bytes: &[u8]) -> String {
    let h = Sha256::digest(bytes);
    h[..8].iter().fold(String::with_capacity(16), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Digest of a feature set over its little-endian binary encoding.
pub fn features_digest(set: &[FeatureVector]) -> String {
    let mut bytes = Vec::with_capacity(set.len() * (16 + 8 * set.first().map_or(0, |f| f.values.len())));
    for f in set {
        bytes.extend_from_slice(&f.record_id.to_le_bytes());
        bytes.extend_from_slice(&(f.label.code() as u64).to_le_bytes());
        for v in &f.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    content_digest(&bytes)
}

/// Wall-clock timer that reads zero on targets without a clock (wasm32).
struct Stopwatch(#[cfg(not(target_family = "wasm"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_family = "wasm"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_family = "wasm"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_family = "wasm")]
        return 0.0;
    }
}

/// Scores a trained model on a labeled test set.
pub fn evaluate(model: &TrainedModel, test: &[FeatureVector]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let start = Stopwatch::start();
    let rows: Vec<&[f64]> = test.iter().map(|f| f.values.as_slice()).collect();
    let pred = predict_batch(model, &rows)?;
    let predict_seconds = start.seconds();
    let truth: Vec<EventClass> = test.iter().map(|f| f.label).collect();
    let conf = confusion(&truth, &pred)?;
    let m = metrics(&conf)?;
    Ok(EvalReport {
        model: model.spec.kind,
        accuracy: m.accuracy,
        per_class: m.per_class,
        top_pair: conf.top_pair(),
        confusion: conf,
        train_seconds: 0.0,
        predict_seconds,
        train_digest: None,
        test_digest: features_digest(test),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub model: ModelKind,
    pub report: Option<EvalReport>,
    /// Set when training or evaluation failed.
    pub error: Option<String>,
}

impl LeaderboardEntry {
    pub fn accuracy(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.accuracy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    /// Accuracy descending, ties by model name; failed models last.
    pub entries: Vec<LeaderboardEntry>,
    /// Largest off-diagonal pair of the top-ranked model.
    pub top_pair: Option<ConfusedPair>,
}

impl Leaderboard {
    pub fn best(&self) -> Option<&EvalReport> {
        self.entries.first().and_then(|e| e.report.as_ref())
    }

    pub fn report(&self, kind: ModelKind) -> Option<&EvalReport> {
        self.entries.iter().find(|e| e.model == kind).and_then(|e| e.report.as_ref())
    }
}

/// Trains and evaluates every spec. Each spec's seed is replaced by one
/// derived from `master_seed`, its position and its own seed. A failing
/// model is recorded with its error and the others still run.
pub fn benchmark(
    train_set: &[FeatureVector],
    test_set: &[FeatureVector],
    specs: &[ModelSpec],
    master_seed: u64,
) -> Result<(Leaderboard, Vec<TrainedModel>)> {
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::invalid("benchmark needs non-empty train and test sets"));
    }
    if specs.is_empty() {
        return Err(Error::invalid("benchmark needs at least one model"));
    }
    let train_digest = features_digest(train_set);
    let outcomes: Vec<(LeaderboardEntry, Option<TrainedModel>)> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let spec = spec.clone().with_seed(derive_seed(master_seed, &[i as u64, spec.seed]));
            let run = || -> Result<(EvalReport, TrainedModel)> {
                let start = Stopwatch::start();
                let model = train(&spec, train_set)?;
                let train_seconds = start.seconds();
                let mut report = evaluate(&model, test_set)?;
                report.train_seconds = train_seconds;
                report.train_digest = Some(train_digest.clone());
                Ok((report, model))
            };
            match run() {
                Ok((report, model)) => (
                    LeaderboardEntry {
                        model: spec.kind,
                        report: Some(report),
                        error: None,
                    },
                    Some(model),
                ),
                Err(e) => (
                    LeaderboardEntry {
                        model: spec.kind,
                        report: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut paired: Vec<_> = outcomes.into_iter().collect();
    paired.sort_by(|(a, _), (b, _)| match (a.accuracy(), b.accuracy()) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.model.name().cmp(b.model.name())),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model.name().cmp(b.model.name()),
    });
    let (entries, models): (Vec<_>, Vec<_>) = paired.into_iter().unzip();
    let top_pair = entries.first().and_then(|e| e.report.as_ref()).and_then(|r| r.top_pair);
    Ok((
        Leaderboard { entries, top_pair },
        models.into_iter().flatten().collect(),
    ))
}

/// Standalone SVG heatmap of a confusion matrix. Cell shading is linear in
/// the count relative to its row maximum; the printed numbers are raw counts.
pub fn render_heatmap_svg(conf: &ConfusionMatrix, names: &[&str]) -> String {
    const CELL: usize = 44;
    const LEFT: usize = 110;
    const TOP: usize = 110;
    let width = LEFT + CELL * K + 20;
    let height = TOP + CELL * K + 20;
    let label = |i: usize| names.get(i).copied().unwrap_or(EventClass::ALL[i].name());

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="16" text-anchor="middle" font-size="13">Predicted class</text>"#,
        LEFT + CELL * K / 2
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{y}" text-anchor="middle" font-size="13" transform="rotate(-90 14 {y})">True class</text>"#,
        y = TOP + CELL * K / 2
    );
    for j in 0..K {
        let x = LEFT + j * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="start" transform="rotate(-60 {x} {y})">{}</text>"#,
            escape(label(j)),
            y = TOP - 6
        );
    }
    for i in 0..K {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            LEFT - 6,
            TOP + i * CELL + CELL / 2,
            escape(label(i))
        );
        let row_max = conf.counts[i].iter().copied().max().unwrap_or(0);
        for j in 0..K {
            let count = conf.counts[i][j];
            // Intensity in 1/1000 steps keeps the output integer-only.
            let level = (count * 1000).checked_div(row_max).unwrap_or(0);
            let (x, y) = (LEFT + j * CELL, TOP + i * CELL);
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#cccccc"/>"##,
                shade(level)
            );
            let ink = if level > 500 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" dominant-baseline="middle" fill="{ink}">{count}</text>"#,
                x + CELL / 2,
                y + CELL / 2
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// White to dark blue; `level` in 0..=1000.
fn shade(level: u64) -> String {
    let lerp = |from: u64, to: u64| (from * (1000 - level) + to * level) / 1000;
    format!("#{:02x}{:02x}{:02x}", lerp(0xff, 0x08), lerp(0xff, 0x30), lerp(0xff, 0x6b))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
