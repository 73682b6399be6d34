//! Gini classification trees and the bagged random forest built from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CartParams, ForestParams, Matrix, TrainingSet};
use crate::rng::{derive_seed, SplitMix64};
use crate::synth::EventClass;

const K: usize = EventClass::COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    pub nodes: Vec<TreeNode>,
}

impl ClassificationTree {
    pub fn predict(&self, z: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { class } => return class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if z[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<ClassificationTree>,
}

impl Forest {
    /// Majority vote over trees; ties go to the lower class code.
    pub fn predict(&self, z: &[f64]) -> usize {
        let mut votes = [0usize; K];
        for t in &self.trees {
            votes[t.predict(z)] += 1;
        }
        majority(&votes)
    }
}

fn majority(counts: &[usize; K]) -> usize {
    let mut best = 0;
    for c in 1..K {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

/// `n - sum(count^2) / n`, i.e. `n` times the Gini impurity.
fn weighted_gini(counts: &[usize; K], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: usize = counts.iter().map(|c| c * c).sum();
    n as f64 - sq as f64 / n as f64
}

pub fn train_cart(set: &TrainingSet, p: &CartParams) -> ClassificationTree {
    let rows: Vec<usize> = (0..set.x.rows).collect();
    grow(&set.x, &set.y, rows, p, &mut |d| (0..d).collect())
}

pub fn train_forest(set: &TrainingSet, p: &ForestParams, seed: u64) -> Forest {
    let n = set.x.rows;
    let d = set.x.cols;
    let mtry = p
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let trees = (0..p.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::new(derive_seed(seed, &[t as u64]));
            let rows: Vec<usize> = if p.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let mut features = |d: usize| {
                if mtry >= d {
                    (0..d).collect()
                } else {
                    rng.sample_indices(d, mtry)
                }
            };
            grow(&set.x, &set.y, rows, &p.tree, &mut features)
        })
        .collect();
    Forest { trees }
}

struct Pending {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
}

/// Depth-first growth with an explicit stack; the left child is expanded
/// before the right one. `features` yields the ascending candidate feature
/// list for each split search.
fn grow(
    x: &Matrix,
    y: &[usize],
    rows: Vec<usize>,
    p: &CartParams,
    features: &mut dyn FnMut(usize) -> Vec<usize>,
) -> ClassificationTree {
    let d = x.cols;
    let mut nodes = vec![TreeNode::Leaf { class: 0 }];
    let mut stack = vec![Pending {
        node: 0,
        rows,
        depth: 0,
    }];
    let mut order: Vec<(f64, usize)> = Vec::new();

    while let Some(Pending { node, rows, depth }) = stack.pop() {
        let mut counts = [0usize; K];
        for &i in &rows {
            counts[y[i]] += 1;
        }
        let n = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = p.max_depth.is_some_and(|m| depth >= m);
        let split = if pure || depth_capped || n < p.min_samples_split {
            None
        } else {
            best_split(x, y, &rows, &counts, features(d), &mut order)
        };
        let Some((feature, threshold)) = split else {
            nodes[node] = TreeNode::Leaf {
                class: majority(&counts),
            };
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.data[i * d + feature] < threshold);
        let left = nodes.len();
        nodes.push(TreeNode::Leaf { class: 0 });
        nodes.push(TreeNode::Leaf { class: 0 });
        nodes[node] = TreeNode::Split {
            feature,
            threshold,
            left,
            right: left + 1,
        };
        stack.push(Pending {
            node: left + 1,
            rows: r,
            depth: depth + 1,
        });
        stack.push(Pending {
            node: left,
            rows: l,
            depth: depth + 1,
        });
    }
    ClassificationTree { nodes }
}

/// Lowest weighted child impurity over the candidate features. Equal scores
/// keep the earlier feature, then the lower threshold.
fn best_split(
    x: &Matrix,
    y: &[usize],
    rows: &[usize],
    counts: &[usize; K],
    features: Vec<usize>,
    order: &mut Vec<(f64, usize)>,
) -> Option<(usize, f64)> {
    let d = x.cols;
    let n = rows.len();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in features {
        order.clear();
        order.extend(rows.iter().map(|&i| (x.data[i * d + f], y[i])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0usize; K];
        let mut right = *counts;
        for s in 1..n {
            let (pv, py) = order[s - 1];
            left[py] += 1;
            right[py] -= 1;
            let v = order[s].0;
            if v <= pv {
                continue;
            }
            let score = weighted_gini(&left, s) + weighted_gini(&right, n - s);
            if best.is_none_or(|b| score < b.0) {
                let mut threshold = 0.5 * (pv + v);
                if threshold <= pv {
                    threshold = v;
                }
                best = Some((score, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
