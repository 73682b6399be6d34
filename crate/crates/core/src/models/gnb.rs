use serde::{Deserialize, Serialize};

use super::{argmax, GnbParams, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub classes: Vec<usize>,
    pub log_priors: Vec<f64>,
    /// Per class, per feature.
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

pub fn train_gnb(set: &TrainingSet, p: &GnbParams) -> GnbModel {
    let d = set.x.cols;
    let n = set.x.rows as f64;

    // Floor relative to the widest feature over the whole set.
    let mut max_var = 0.0f64;
    for j in 0..d {
        let mean = set.x.iter_rows().map(|r| r[j]).sum::<f64>() / n;
        let var = set.x.iter_rows().map(|r| r[j]).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        max_var = max_var.max(var);
    }
    let floor = (p.var_smoothing * max_var).max(f64::MIN_POSITIVE);

    let mut log_priors = Vec::new();
    let mut means = Vec::new();
    let mut variances = Vec::new();
    for &c in &set.classes {
        let rows: Vec<&[f64]> = set.x.iter_rows().zip(&set.y).filter(|(_, &y)| y == c).map(|(r, _)| r).collect();
        let m = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (a, v) in mean.iter_mut().zip(*r) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= m);
        let mut var = vec![0.0; d];
        for r in &rows {
            for ((s, v), mu) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        var.iter_mut().for_each(|s| *s = (*s / m).max(floor));
        log_priors.push((m / n).ln());
        means.push(mean);
        variances.push(var);
    }
    GnbModel {
        classes: set.classes.clone(),
        log_priors,
        means,
        variances,
    }
}

impl GnbModel {
    /// Unnormalized log posteriors, one per entry of `classes`.
    pub fn log_posteriors(&self, z: &[f64]) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(lp, (mu, var))| {
                lp - 0.5
                    * z.iter()
                        .zip(mu.iter().zip(var))
                        .map(|(x, (m, v))| ln_2pi + v.ln() + (x - m) * (x - m) / v)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        self.classes[argmax(&self.log_posteriors(z))]
    }
}
