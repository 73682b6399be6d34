//! One-vs-one multiclass SVM on top of [`smo_binary`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::smo::{smo_binary, SmoConfig};
use super::{dot, Matrix, SvmParams, TrainingSet};
use crate::error::Result;

/// Binary machine separating `positive` (label +1) from `negative` (-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub positive: usize,
    pub negative: usize,
    /// Indices into [`OvoSvm::support_vectors`].
    pub support: Vec<usize>,
    /// `alpha_i * y_i` for each entry of `support`.
    pub coef: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoSvm {
    pub kernel: Kernel,
    pub classes: Vec<usize>,
    /// Union of the support vectors of all machines, in training order.
    pub support_vectors: Matrix,
    pub machines: Vec<BinaryMachine>,
}

/// Decision value of one pairwise machine; positive favours `positive`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDecision {
    pub positive: usize,
    pub negative: usize,
    pub value: f64,
}

/// One vote per machine to the class its sign favours. Ties on votes go to
/// the larger sum of winning decision magnitudes, then to the lower class
/// code. Only classes named by some machine can win.
pub fn ovo_aggregate(decisions: &[PairDecision]) -> usize {
    let mut votes = [0usize; crate::synth::EventClass::COUNT];
    let mut strength = [0.0f64; crate::synth::EventClass::COUNT];
    let mut seen = [false; crate::synth::EventClass::COUNT];
    for d in decisions {
        seen[d.positive] = true;
        seen[d.negative] = true;
        // A zero decision votes for the positive (lower-code) class.
        let winner = if d.value >= 0.0 { d.positive } else { d.negative };
        votes[winner] += 1;
        strength[winner] += d.value.abs();
    }
    let mut best: Option<usize> = None;
    for c in 0..votes.len() {
        if !seen[c] {
            continue;
        }
        best = match best {
            None => Some(c),
            Some(b) if votes[c] > votes[b] || (votes[c] == votes[b] && strength[c] > strength[b]) => Some(c),
            keep => keep,
        };
    }
    best.unwrap_or(0)
}

pub fn train_ovo(set: &TrainingSet, kernel: Kernel, params: &SvmParams) -> Result<OvoSvm> {
    let n = set.x.rows;
    let norms: Vec<f64> = set.x.iter_rows().map(|r| dot(r, r)).collect();
    let gram = full_gram(&set.x, &norms, kernel);

    let pairs: Vec<(usize, usize)> = set
        .classes
        .iter()
        .enumerate()
        .flat_map(|(a, &p)| set.classes[a + 1..].iter().map(move |&q| (p, q)))
        .collect();
    let cfg = SmoConfig {
        c: params.c,
        tol: params.tol,
        max_sweeps: params.max_sweeps,
    };

    let solved = pairs
        .par_iter()
        .map(|&(p, q)| {
            let idx: Vec<usize> = (0..n).filter(|&i| set.y[i] == p || set.y[i] == q).collect();
            let m = idx.len();
            let mut k = Vec::with_capacity(m * m);
            for &i in &idx {
                k.extend(idx.iter().map(|&j| gram[i * n + j]));
            }
            let y: Vec<f64> = idx.iter().map(|&i| if set.y[i] == p { 1.0 } else { -1.0 }).collect();
            let sol = smo_binary(&k, &y, &cfg)?;
            let sv: Vec<(usize, f64)> = idx
                .iter()
                .zip(sol.alpha.iter().zip(&y))
                .filter(|(_, (a, _))| **a > 0.0)
                .map(|(&i, (a, yy))| (i, a * yy))
                .collect();
            Ok((p, q, sv, sol.bias))
        })
        .collect::<Result<Vec<_>>>()?;

    // Compact the support set, keeping training order.
    let mut used = vec![false; n];
    for (_, _, sv, _) in &solved {
        for &(i, _) in sv {
            used[i] = true;
        }
    }
    let mut remap = vec![usize::MAX; n];
    let mut rows = Vec::new();
    for i in 0..n {
        if used[i] {
            remap[i] = rows.len();
            rows.push(set.x.row(i).to_vec());
        }
    }
    let machines = solved
        .into_iter()
        .map(|(p, q, sv, bias)| BinaryMachine {
            positive: p,
            negative: q,
            support: sv.iter().map(|&(i, _)| remap[i]).collect(),
            coef: sv.iter().map(|&(_, c)| c).collect(),
            bias,
        })
        .collect();

    Ok(OvoSvm {
        kernel,
        classes: set.classes.clone(),
        support_vectors: if rows.is_empty() {
            Matrix {
                rows: 0,
                cols: set.x.cols,
                data: Vec::new(),
            }
        } else {
            Matrix::from_rows(&rows)
        },
        machines,
    })
}

fn full_gram(x: &Matrix, norms: &[f64], kernel: Kernel) -> Vec<f64> {
    let n = x.rows;
    let mut gram = vec![0.0; n * n];
    gram.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = x.row(i);
        for (j, out) in row.iter_mut().enumerate() {
            *out = kernel.from_dot(dot(xi, x.row(j)), norms[i], norms[j]);
        }
    });
    gram
}

impl OvoSvm {
    pub fn decisions(&self, z: &[f64]) -> Vec<PairDecision> {
        let zz = dot(z, z);
        let kvals: Vec<f64> = self
            .support_vectors
            .iter_rows()
            .map(|sv| self.kernel.from_dot(dot(sv, z), dot(sv, sv), zz))
            .collect();
        self.machines
            .iter()
            .map(|m| PairDecision {
                positive: m.positive,
                negative: m.negative,
                value: m.support.iter().zip(&m.coef).map(|(&s, c)| c * kvals[s]).sum::<f64>() + m.bias,
            })
            .collect()
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        ovo_aggregate(&self.decisions(z))
    }
}
