//! Multinomial logistic regression trained by full-batch gradient descent
//! with Armijo backtracking.
//!
//! Objective: mean cross-entropy plus `lambda / 2 * |W|^2`; biases are not
//! penalized. Parameters are stored class-major, each class row holding `d`
//! weights followed by its bias.

use serde::{Deserialize, Serialize};

use super::{argmax, dot, LogRegParams, Matrix, TrainingSet};

const GRAD_TOL: f64 = 1e-6;
const ARMIJO: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub classes: Vec<usize>,
    pub dim: usize,
    pub params: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the gradient tolerance.
    pub converged: bool,
    pub final_loss: f64,
}

impl LogRegModel {
    pub fn scores(&self, z: &[f64]) -> Vec<f64> {
        let w = self.dim + 1;
        (0..self.classes.len())
            .map(|c| dot(&self.params[c * w..c * w + self.dim], z) + self.params[c * w + self.dim])
            .collect()
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        self.classes[argmax(&self.scores(z))]
    }
}

/// Logits `n x k` for parameters `params`.
fn logits(x: &Matrix, params: &[f64], k: usize) -> Vec<f64> {
    let d = x.cols;
    let mut out = Vec::with_capacity(x.rows * k);
    for row in x.iter_rows() {
        for c in 0..k {
            let p = &params[c * (d + 1)..(c + 1) * (d + 1)];
            out.push(dot(&p[..d], row) + p[d]);
        }
    }
    out
}

fn penalty(params: &[f64], d: usize, lambda: f64) -> f64 {
    let sq: f64 = params
        .chunks_exact(d + 1)
        .map(|p| p[..d].iter().map(|w| w * w).sum::<f64>())
        .sum();
    0.5 * lambda * sq
}

fn data_loss(z: &[f64], target: &[usize], k: usize) -> f64 {
    let n = target.len();
    let total: f64 = z
        .chunks_exact(k)
        .zip(target)
        .map(|(s, &t)| {
            let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - s[t]
        })
        .sum();
    total / n as f64
}

/// Objective and its gradient at `params`. `target` holds class indices
/// `0..k`.
pub fn loss_and_grad(x: &Matrix, target: &[usize], k: usize, params: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let z = logits(x, params, k);
    let loss = data_loss(&z, target, k) + penalty(params, x.cols, lambda);
    (loss, gradient(x, target, k, params, &z, lambda))
}

fn gradient(x: &Matrix, target: &[usize], k: usize, params: &[f64], z: &[f64], lambda: f64) -> Vec<f64> {
    let d = x.cols;
    let n = x.rows as f64;
    let mut grad = vec![0.0; params.len()];
    let mut e = vec![0.0; k];
    for ((row, s), &t) in x.iter_rows().zip(z.chunks_exact(k)).zip(target) {
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (ec, v) in e.iter_mut().zip(s) {
            *ec = (v - m).exp();
        }
        let total: f64 = e.iter().sum();
        for c in 0..k {
            let r = (e[c] / total - if c == t { 1.0 } else { 0.0 }) / n;
            let g = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
            for (gj, xj) in g[..d].iter_mut().zip(row) {
                *gj += r * xj;
            }
            g[d] += r;
        }
    }
    for (g, p) in grad.chunks_exact_mut(d + 1).zip(params.chunks_exact(d + 1)) {
        for j in 0..d {
            g[j] += lambda * p[j];
        }
    }
    grad
}

pub fn train_logreg(set: &TrainingSet, p: &LogRegParams) -> LogRegModel {
    let k = set.classes.len();
    let d = set.x.cols;
    let target: Vec<usize> = set.y.iter().map(|c| set.classes.binary_search(c).unwrap()).collect();
    let mut params = vec![0.0; k * (d + 1)];
    let mut z = logits(&set.x, &params, k);
    let mut loss = data_loss(&z, &target, k) + penalty(&params, d, p.lambda);
    let mut grad = gradient(&set.x, &target, k, &params, &z, p.lambda);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < p.max_iters {
        let gnorm2 = dot(&grad, &grad);
        if gnorm2.sqrt() < GRAD_TOL {
            converged = true;
            break;
        }
        // Logits are affine in the parameters, so a trial point only needs
        // z - t * dz with dz the logits of the gradient itself.
        let dz = logits(&set.x, &grad, k);
        step *= 2.0;
        let accepted = loop {
            let cand: Vec<f64> = params.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let zc: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a - step * b).collect();
            let l = data_loss(&zc, &target, k) + penalty(&cand, d, p.lambda);
            if l <= loss - ARMIJO * step * gnorm2 {
                break Some((cand, zc, l));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((cand, zc, l)) = accepted else {
            break;
        };
        params = cand;
        z = zc;
        loss = l;
        grad = gradient(&set.x, &target, k, &params, &z, p.lambda);
        iterations += 1;
    }
    if dot(&grad, &grad).sqrt() < GRAD_TOL {
        converged = true;
    }
    LogRegModel {
        classes: set.classes.clone(),
        dim: d,
        params,
        iterations,
        converged,
        final_loss: loss,
    }
}
