//! Softmax gradient boosting with second-order (Newton) regression trees.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, GbtParams, Matrix, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegNode {
    Leaf {
        weight: f64,
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
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                RegNode::Leaf { weight } => return weight,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if z[feature] < threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub classes: Vec<usize>,
    pub eta: f64,
    /// `rounds[r][k]` is the tree of round `r` for `classes[k]`.
    pub rounds: Vec<Vec<RegTree>>,
}

impl GbtModel {
    pub fn scores(&self, z: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.classes.len()];
        for trees in &self.rounds {
            for (sk, t) in s.iter_mut().zip(trees) {
                *sk += self.eta * t.eval(z);
            }
        }
        s
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        self.classes[argmax(&self.scores(z))]
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Cross-entropy `-ln p_target` of the softmax of `scores`.
pub fn softmax_loss(scores: &[f64], target: usize) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    lse - scores[target]
}

/// Gradient `p_k - [k = target]` and diagonal hessian `p_k (1 - p_k)`.
pub fn softmax_grad_hess(scores: &[f64], target: usize) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(scores);
    let g = p.iter().enumerate().map(|(k, &pk)| pk - if k == target { 1.0 } else { 0.0 }).collect();
    let h = p.iter().map(|&pk| pk * (1.0 - pk)).collect();
    (g, h)
}

pub fn train_gbt(set: &TrainingSet, p: &GbtParams) -> GbtModel {
    let n = set.x.rows;
    let k = set.classes.len();
    let target: Vec<usize> = set.y.iter().map(|c| set.classes.binary_search(c).unwrap()).collect();
    let order = presort(&set.x);
    let mut scores = vec![0.0; n * k];
    let mut rounds = Vec::with_capacity(p.rounds);

    for _ in 0..p.rounds {
        let mut g = vec![vec![0.0; n]; k];
        let mut h = vec![vec![0.0; n]; k];
        for i in 0..n {
            let (gi, hi) = softmax_grad_hess(&scores[i * k..(i + 1) * k], target[i]);
            for c in 0..k {
                g[c][i] = gi[c];
                h[c][i] = hi[c];
            }
        }
        let trees: Vec<RegTree> = (0..k)
            .into_par_iter()
            .map(|c| build_tree(&set.x, &order, &g[c], &h[c], p))
            .collect();
        for i in 0..n {
            let row = set.x.row(i);
            for (c, t) in trees.iter().enumerate() {
                scores[i * k + c] += p.eta * t.eval(row);
            }
        }
        rounds.push(trees);
    }
    GbtModel {
        classes: set.classes.clone(),
        eta: p.eta,
        rounds,
    }
}

/// Row indices sorted by each feature, ties by row index.
fn presort(x: &Matrix) -> Vec<Vec<u32>> {
    (0..x.cols)
        .map(|f| {
            let mut idx: Vec<u32> = (0..x.rows as u32).collect();
            idx.sort_by(|&a, &b| x.data[a as usize * x.cols + f].total_cmp(&x.data[b as usize * x.cols + f]));
            idx
        })
        .collect()
}

fn score_term(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        g * g / (h + lambda)
    } else {
        0.0
    }
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        -g / (h + lambda)
    } else {
        0.0
    }
}

struct Frontier {
    node: usize,
    g: f64,
    h: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

const SETTLED: usize = usize::MAX;

/// Grows one tree level by level with exact greedy split search.
fn build_tree(x: &Matrix, order: &[Vec<u32>], g: &[f64], h: &[f64], p: &GbtParams) -> RegTree {
    let n = x.rows;
    let d = x.cols;
    let mut nodes = vec![RegNode::Leaf { weight: 0.0 }];
    let mut slot = vec![0usize; n];
    let mut frontier = vec![Frontier {
        node: 0,
        g: g.iter().sum(),
        h: h.iter().sum(),
    }];

    for depth in 0..=p.max_depth {
        if frontier.is_empty() {
            break;
        }
        let m = frontier.len();
        let mut best: Vec<Option<Candidate>> = vec![None; m];
        if depth < p.max_depth {
            let mut gl = vec![0.0; m];
            let mut hl = vec![0.0; m];
            let mut prev: Vec<Option<f64>> = vec![None; m];
            for (f, sorted) in order.iter().enumerate() {
                gl.fill(0.0);
                hl.fill(0.0);
                prev.fill(None);
                for &i in sorted {
                    let i = i as usize;
                    let s = slot[i];
                    if s == SETTLED {
                        continue;
                    }
                    let v = x.data[i * d + f];
                    if let Some(pv) = prev[s] {
                        if v > pv {
                            let fr = &frontier[s];
                            let (gr, hr) = (fr.g - gl[s], fr.h - hl[s]);
                            let gain = 0.5
                                * (score_term(gl[s], hl[s], p.lambda) + score_term(gr, hr, p.lambda)
                                    - score_term(fr.g, fr.h, p.lambda))
                                - p.gamma;
                            if gain > 0.0 && best[s].is_none_or(|b| gain > b.gain) {
                                let mut threshold = 0.5 * (pv + v);
                                if threshold <= pv {
                                    threshold = v;
                                }
                                best[s] = Some(Candidate {
                                    gain,
                                    feature: f,
                                    threshold,
                                });
                            }
                        }
                    }
                    gl[s] += g[i];
                    hl[s] += h[i];
                    prev[s] = Some(v);
                }
            }
        }

        let mut next = Vec::new();
        let mut children = vec![(SETTLED, SETTLED); m];
        for (s, fr) in frontier.iter().enumerate() {
            match best[s] {
                None => nodes[fr.node] = RegNode::Leaf {
                    weight: leaf_weight(fr.g, fr.h, p.lambda),
                },
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(RegNode::Leaf { weight: 0.0 });
                    nodes.push(RegNode::Leaf { weight: 0.0 });
                    nodes[fr.node] = RegNode::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    children[s] = (next.len(), next.len() + 1);
                    for node in [left, left + 1] {
                        next.push(Frontier { node, g: 0.0, h: 0.0 });
                    }
                }
            }
        }
        for i in 0..n {
            let s = slot[i];
            if s == SETTLED {
                continue;
            }
            slot[i] = match best[s] {
                None => SETTLED,
                Some(c) => {
                    let (l, r) = children[s];
                    let t = if x.data[i * d + c.feature] < c.threshold { l } else { r };
                    next[t].g += g[i];
                    next[t].h += h[i];
                    t
                }
            };
        }
        frontier = next;
    }
    RegTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn params(rounds: usize, max_depth: usize) -> GbtParams {
        GbtParams {
            rounds,
            eta: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            max_depth,
        }
    }

    #[test]
    fn first_round_by_hand() {
        let set = TrainingSet::new(Matrix::from_rows(&[[0.0], [1.0]]), vec![0, 1]).unwrap();
        let m = train_gbt(&set, &params(1, 1));
        let t0 = &m.rounds[0][0];
        assert!((t0.eval(&[0.0]) - 0.4).abs() < 1e-15);
        assert!((t0.eval(&[1.0]) + 0.4).abs() < 1e-15);
        match t0.nodes[0] {
            RegNode::Split { threshold, .. } => assert_eq!(threshold, 0.5),
            _ => panic!("root should split"),
        }
        let s = m.scores(&[0.0]);
        assert!((s[0] - 0.12).abs() < 1e-15 && (s[1] + 0.12).abs() < 1e-15);
        assert_eq!(m.predict(&[0.0]), 0);
        assert_eq!(m.predict(&[1.0]), 1);
    }

    #[test]
    fn grad_hess_match_finite_differences() {
        let mut rng = SplitMix64::new(11);
        let step = 1e-4;
        for _ in 0..50 {
            let k = 2 + rng.below(12);
            let s: Vec<f64> = (0..k).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let y = rng.below(k);
            let (g, h) = softmax_grad_hess(&s, y);
            for c in 0..k {
                let mut plus = s.clone();
                let mut minus = s.clone();
                plus[c] += step;
                minus[c] -= step;
                let (lp, l0, lm) = (softmax_loss(&plus, y), softmax_loss(&s, y), softmax_loss(&minus, y));
                let fd_g = (lp - lm) / (2.0 * step);
                let fd_h = (lp - 2.0 * l0 + lm) / (step * step);
                assert!((fd_g - g[c]).abs() <= 1e-6 * g[c].abs().max(1e-2), "g {fd_g} vs {}", g[c]);
                let fd_h2 = (softmax_grad_hess(&plus, y).0[c] - softmax_grad_hess(&minus, y).0[c]) / (2.0 * step);
                assert!((fd_h2 - h[c]).abs() <= 1e-6 * h[c].abs().max(1e-2), "h {fd_h2} vs {}", h[c]);
                // Second difference of the loss is coarser but must agree too.
                assert!((fd_h - h[c]).abs() <= 1e-4, "h2 {fd_h} vs {}", h[c]);
            }
        }
    }

    #[test]
    fn separable_2d_reaches_full_training_accuracy() {
        let mut rng = SplitMix64::new(3);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..40 {
            let a = rng.uniform(-1.0, 1.0);
            let b = rng.uniform(-1.0, 1.0);
            rows.push([a, b]);
            y.push(usize::from(a + 0.5 * b > 0.1));
        }
        let set = TrainingSet::new(Matrix::from_rows(&rows), y.clone()).unwrap();
        let m = train_gbt(&set, &params(20, 6));
        for (r, &label) in rows.iter().zip(&y) {
            assert_eq!(m.predict(r), label);
        }
    }

    #[test]
    fn constant_features_give_prior_leaves() {
        let set = TrainingSet::new(Matrix::from_rows(&[[1.0], [1.0], [1.0]]), vec![0, 0, 4]).unwrap();
        let m = train_gbt(&set, &params(3, 3));
        for trees in &m.rounds {
            for t in trees {
                assert_eq!(t.nodes.len(), 1);
            }
        }
        assert_eq!(m.predict(&[5.0]), 0);
    }
}
