//! Sequential minimal optimization for the binary soft-margin SVM dual.
//!
//! Solves `min 1/2 a'Qa - e'a` subject to `0 <= a_i <= C` and `y'a = 0`,
//! with `Q_ij = y_i y_j K_ij`. The working pair is chosen by the
//! second-order rule (maximal violator for `i`, largest guaranteed
//! decrease for `j`) and the gradient is maintained incrementally.
//! Iteration stops when the maximal KKT gap `m(a) - M(a)` drops below `tol`,
//! which bounds every per-sample KKT residual by `tol` once the bias is taken
//! from the free support vectors.

use crate::error::{Error, Result};

/// Curvature used when the pair's second derivative is not positive.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SmoConfig {
    pub c: f64,
    pub tol: f64,
    /// One sweep is `n` pair updates.
    pub max_sweeps: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Dual objective `e'a - 1/2 a'Qa` at the end of every sweep and at exit.
    pub objective_history: Vec<f64>,
    /// Largest KKT residual of the returned solution.
    pub max_violation: f64,
}

/// Solves the dual for the `n x n` row-major kernel matrix `kernel` and
/// labels `y` in {-1, +1}.
pub fn smo_binary(kernel: &[f64], y: &[f64], cfg: &SmoConfig) -> Result<SmoSolution> {
    let n = y.len();
    if kernel.len() != n * n {
        return Err(Error::invalid(format!("kernel matrix must be {n}x{n}")));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("labels must be -1 or +1"));
    }
    if !(cfg.c > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::invalid("C and tol must be positive"));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::invalid("both labels must be present"));
    }
    let c = cfg.c;
    let k = |i: usize, j: usize| kernel[i * n + j];

    let mut alpha = vec![0.0; n];
    // Gradient of 1/2 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let mut history = Vec::new();
    let max_iter = cfg.max_sweeps.saturating_mul(n.max(1));
    let mut iter = 0;

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    loop {
        // i: maximal -y_t G_t over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: among I_low, the best second-order decrease; also track M(a).
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_decrease = f64::NEG_INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let diff = gmax - v;
                if diff > 0.0 {
                    let mut quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let decrease = diff * diff / quad;
                    if decrease > best_decrease {
                        best_decrease = decrease;
                        j_sel = Some(t);
                    }
                }
            }
        }

        let gap = gmax - gmin;
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gap >= cfg.tol => (i, j),
            _ => break,
        };
        if iter >= max_iter {
            let sol = finish(&alpha, &grad, y, c, iter, history);
            return Err(Error::Convergence {
                sweeps: cfg.max_sweeps,
                worst_violation: sol.max_violation.max(gap),
            });
        }

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
        iter += 1;
        if iter % n.max(1) == 0 {
            history.push(dual_objective(&alpha, &grad));
        }
    }

    Ok(finish(&alpha, &grad, y, c, iter, history))
}

/// `e'a - 1/2 a'Qa`, computed from the maintained gradient `G = Qa - e`.
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

fn finish(alpha: &[f64], grad: &[f64], y: &[f64], c: f64, iterations: usize, mut history: Vec<f64>) -> SmoSolution {
    // Bias from the free support vectors, otherwise the midpoint of the
    // feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };
    let bias = -rho;

    let mut max_violation = 0.0f64;
    for t in 0..alpha.len() {
        // y_t f(x_t) = G_t + 1 + y_t b
        let margin = grad[t] + 1.0 + y[t] * bias;
        let v = if alpha[t] <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if alpha[t] >= c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        max_violation = max_violation.max(v);
    }
    history.push(dual_objective(alpha, grad));
    SmoSolution {
        alpha: alpha.to_vec(),
        bias,
        iterations,
        objective_history: history,
        max_violation,
    }
}
