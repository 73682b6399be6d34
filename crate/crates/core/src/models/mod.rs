//! The nine benchmark classifiers behind one train/predict contract.
//!
//! Every model is trained on z-scored features: [`train`] fits a
//! [`Normalizer`] on the training rows, normalizes them and hands them to the
//! kind-specific trainer. The normalizer is stored in the [`TrainedModel`] and
//! applied again by [`predict`].

pub mod gbt;
pub mod gnb;
pub mod kernel;
pub mod knn;
pub mod logreg;
pub mod smo;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Normalizer};
use crate::synth::EventClass;

pub use kernel::{Kernel, KernelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    LinearSvm,
    CubicSvm,
    RbfSvm,
    Gbt,
    Logreg,
    Knn,
    Cart,
    Forest,
    Gnb,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::LinearSvm,
        ModelKind::CubicSvm,
        ModelKind::RbfSvm,
        ModelKind::Gbt,
        ModelKind::Logreg,
        ModelKind::Knn,
        ModelKind::Cart,
        ModelKind::Forest,
        ModelKind::Gnb,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearSvm => "linear-svm",
            ModelKind::CubicSvm => "cubic-svm",
            ModelKind::RbfSvm => "rbf-svm",
            ModelKind::Gbt => "gbt",
            ModelKind::Logreg => "logreg",
            ModelKind::Knn => "knn",
            ModelKind::Cart => "cart",
            ModelKind::Forest => "forest",
            ModelKind::Gnb => "gnb",
        }
    }

    pub fn is_svm(self) -> bool {
        matches!(self, ModelKind::LinearSvm | ModelKind::CubicSvm | ModelKind::RbfSvm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace('_', "-");
        let alias = match lower.as_str() {
            "xgboost" => "gbt",
            "svm" | "linear-svc" => "linear-svm",
            "rbf-svc" => "rbf-svm",
            "logistic-regression" => "logreg",
            "decision-tree" => "cart",
            "random-forest" => "forest",
            "naive-bayes" => "gnb",
            other => other,
        };
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == alias)
            .ok_or_else(|| Error::invalid(format!("unknown model '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Kernel scale; `None` means `1 / d`. Unused by the linear kernel.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub rounds: usize,
    pub eta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub lambda: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Features considered per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub tree: CartParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbParams {
    /// Variance floor as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    Svm(SvmParams),
    Gbt(GbtParams),
    Logreg(LogRegParams),
    Knn(KnnParams),
    Cart(CartParams),
    Forest(ForestParams),
    Gnb(GnbParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub params: Hyperparams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        let params = match kind {
            ModelKind::LinearSvm | ModelKind::CubicSvm | ModelKind::RbfSvm => Hyperparams::Svm(SvmParams {
                c: 1.0,
                gamma: None,
                tol: 1e-3,
                max_sweeps: 10_000,
            }),
            ModelKind::Gbt => Hyperparams::Gbt(GbtParams {
                rounds: 50,
                eta: 0.3,
                lambda: 1.0,
                gamma: 0.0,
                max_depth: 6,
            }),
            ModelKind::Logreg => Hyperparams::Logreg(LogRegParams {
                lambda: 1e-4,
                max_iters: 2000,
            }),
            ModelKind::Knn => Hyperparams::Knn(KnnParams { k: 5 }),
            ModelKind::Cart => Hyperparams::Cart(CartParams {
                max_depth: None,
                min_samples_split: 2,
            }),
            ModelKind::Forest => Hyperparams::Forest(ForestParams {
                trees: 100,
                max_features: None,
                bootstrap: true,
                tree: CartParams {
                    max_depth: None,
                    min_samples_split: 2,
                },
            }),
            ModelKind::Gnb => Hyperparams::Gnb(GnbParams { var_smoothing: 1e-9 }),
        };
        Self { kind, params, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The default suite, in [`ModelKind::ALL`] order.
    pub fn default_suite(seed: u64) -> Vec<ModelSpec> {
        ModelKind::ALL.iter().map(|&k| ModelSpec::new(k).with_seed(seed)).collect()
    }

    /// Overrides one hyperparameter by name.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::invalid(format!("bad value '{value}' for parameter '{key}'"));
        let float = || value.parse::<f64>().map_err(|_| bad());
        let int = || value.parse::<usize>().map_err(|_| bad());
        let unknown = || Error::invalid(format!("model {} has no parameter '{key}'", self.kind));
        if key == "seed" {
            self.seed = value.parse().map_err(|_| bad())?;
            return self.validate();
        }
        match &mut self.params {
            Hyperparams::Svm(p) => match key {
                "c" => p.c = float()?,
                "gamma" => p.gamma = Some(float()?),
                "tol" => p.tol = float()?,
                "max_sweeps" => p.max_sweeps = int()?,
                _ => return Err(unknown()),
            },
            Hyperparams::Gbt(p) => match key {
                "rounds" => p.rounds = int()?,
                "eta" => p.eta = float()?,
                "lambda" => p.lambda = float()?,
                "gamma" => p.gamma = float()?,
                "max_depth" => p.max_depth = int()?,
                _ => return Err(unknown()),
            },
            Hyperparams::Logreg(p) => match key {
                "lambda" => p.lambda = float()?,
                "max_iters" => p.max_iters = int()?,
                _ => return Err(unknown()),
            },
            Hyperparams::Knn(p) => match key {
                "k" => p.k = int()?,
                _ => return Err(unknown()),
            },
            Hyperparams::Cart(p) => match key {
                "max_depth" => p.max_depth = Some(int()?),
                "min_samples_split" => p.min_samples_split = int()?,
                _ => return Err(unknown()),
            },
            Hyperparams::Forest(p) => match key {
                "trees" => p.trees = int()?,
                "max_features" => p.max_features = Some(int()?),
                "bootstrap" => p.bootstrap = value.parse().map_err(|_| bad())?,
                "max_depth" => p.tree.max_depth = Some(int()?),
                "min_samples_split" => p.tree.min_samples_split = int()?,
                _ => return Err(unknown()),
            },
            Hyperparams::Gnb(p) => match key {
                "var_smoothing" => p.var_smoothing = float()?,
                _ => return Err(unknown()),
            },
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("{}: {what}", self.kind)));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match (&self.params, self.kind) {
            (Hyperparams::Svm(p), k) if k.is_svm() => {
                if !positive(p.c) {
                    return bad("C must be > 0");
                }
                if p.gamma.is_some_and(|g| !positive(g)) {
                    return bad("gamma must be > 0");
                }
                if !positive(p.tol) || p.max_sweeps == 0 {
                    return bad("tol must be > 0 and max_sweeps >= 1");
                }
            }
            (Hyperparams::Gbt(p), ModelKind::Gbt) => {
                if p.rounds == 0 || p.max_depth == 0 {
                    return bad("rounds and max_depth must be >= 1");
                }
                if !(p.eta > 0.0 && p.eta <= 1.0) {
                    return bad("eta must lie in (0, 1]");
                }
                if !(p.lambda >= 0.0 && p.gamma >= 0.0) {
                    return bad("lambda and gamma must be >= 0");
                }
            }
            (Hyperparams::Logreg(p), ModelKind::Logreg) => {
                if !(p.lambda >= 0.0) || p.max_iters == 0 {
                    return bad("lambda must be >= 0 and max_iters >= 1");
                }
            }
            (Hyperparams::Knn(p), ModelKind::Knn) => {
                if p.k == 0 {
                    return bad("k must be >= 1");
                }
            }
            (Hyperparams::Cart(p), ModelKind::Cart) => validate_cart(p, self.kind)?,
            (Hyperparams::Forest(p), ModelKind::Forest) => {
                validate_cart(&p.tree, self.kind)?;
                if p.trees == 0 || p.max_features == Some(0) {
                    return bad("trees and max_features must be >= 1");
                }
            }
            (Hyperparams::Gnb(p), ModelKind::Gnb) => {
                if !(p.var_smoothing > 0.0) {
                    return bad("var_smoothing must be > 0");
                }
            }
            _ => return bad("hyperparameter family does not match the model kind"),
        }
        Ok(())
    }
}

fn validate_cart(p: &CartParams, kind: ModelKind) -> Result<()> {
    if p.max_depth == Some(0) || p.min_samples_split < 2 {
        return Err(Error::invalid(format!("{kind}: max_depth must be >= 1 and min_samples_split >= 2")));
    }
    Ok(())
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// Dot product with four independent accumulators.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Normalized training data handed to the kind-specific trainers.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub x: Matrix,
    /// Class codes, 0..13.
    pub y: Vec<usize>,
    /// Distinct class codes present, ascending.
    pub classes: Vec<usize>,
}

impl TrainingSet {
    pub fn new(x: Matrix, y: Vec<usize>) -> Result<Self> {
        if x.rows != y.len() {
            return Err(Error::invalid("row count and label count differ"));
        }
        if x.rows == 0 || x.cols == 0 {
            return Err(Error::invalid("training set is empty"));
        }
        if let Some(bad) = y.iter().find(|&&c| c >= EventClass::COUNT) {
            return Err(Error::invalid(format!("label {bad} outside 0..13")));
        }
        let mut classes = y.clone();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::invalid("training needs at least two classes"));
        }
        Ok(Self { x, y, classes })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "state", rename_all = "snake_case")]
pub enum ModelState {
    Svm(svm::OvoSvm),
    Gbt(gbt::GbtModel),
    Logreg(logreg::LogRegModel),
    Knn(knn::KnnModel),
    Cart(tree::ClassificationTree),
    Forest(tree::Forest),
    Gnb(gnb::GnbModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub normalizer: Normalizer,
    pub state: ModelState,
}

pub fn train(spec: &ModelSpec, data: &[FeatureVector]) -> Result<TrainedModel> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let raw: Vec<&[f64]> = data.iter().map(|f| f.values.as_slice()).collect();
    let normalizer = Normalizer::fit(&raw)?;
    let rows = raw.iter().map(|r| normalizer.apply(r)).collect::<Result<Vec<_>>>()?;
    let set = TrainingSet::new(Matrix::from_rows(&rows), data.iter().map(|f| f.label.code()).collect())?;

    let state = match &spec.params {
        Hyperparams::Svm(p) => {
            let kernel = Kernel::for_model(spec.kind, p.gamma, set.x.cols)?;
            ModelState::Svm(svm::train_ovo(&set, kernel, p)?)
        }
        Hyperparams::Gbt(p) => ModelState::Gbt(gbt::train_gbt(&set, p)),
        Hyperparams::Logreg(p) => ModelState::Logreg(logreg::train_logreg(&set, p)),
        Hyperparams::Knn(p) => ModelState::Knn(knn::train_knn(&set, p)),
        Hyperparams::Cart(p) => ModelState::Cart(tree::train_cart(&set, p)),
        Hyperparams::Forest(p) => ModelState::Forest(tree::train_forest(&set, p, spec.seed)),
        Hyperparams::Gnb(p) => ModelState::Gnb(gnb::train_gnb(&set, p)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        normalizer,
        state,
    })
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.normalizer.dim()
    }

    fn predict_normalized(&self, z: &[f64]) -> usize {
        match &self.state {
            ModelState::Svm(m) => m.predict(z),
            ModelState::Gbt(m) => m.predict(z),
            ModelState::Logreg(m) => m.predict(z),
            ModelState::Knn(m) => m.predict(z),
            ModelState::Cart(m) => m.predict(z),
            ModelState::Forest(m) => m.predict(z),
            ModelState::Gnb(m) => m.predict(z),
        }
    }
}

pub fn predict(model: &TrainedModel, v: &[f64]) -> Result<EventClass> {
    let z = model.normalizer.apply(v)?;
    EventClass::from_code(model.predict_normalized(&z))
}

pub fn predict_batch<R: AsRef<[f64]> + Sync>(model: &TrainedModel, rows: &[R]) -> Result<Vec<EventClass>> {
    use rayon::prelude::*;
    rows.par_iter().map(|r| predict(model, r.as_ref())).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert_eq!("XGBoost".parse::<ModelKind>().unwrap(), ModelKind::Gbt);
        assert!("mlp".parse::<ModelKind>().is_err());
    }

    #[test]
    fn defaults_are_valid_and_overrides_checked() {
        for s in ModelSpec::default_suite(1) {
            s.validate().unwrap();
        }
        let mut s = ModelSpec::new(ModelKind::CubicSvm);
        s.set_param("c", "10").unwrap();
        assert!(s.set_param("c", "-1").is_err());
        assert!(s.set_param("k", "3").is_err());
        let mut g = ModelSpec::new(ModelKind::Gbt);
        assert!(g.set_param("eta", "1.5").is_err());
        let mut k = ModelSpec::new(ModelKind::Knn);
        assert!(k.set_param("k", "0").is_err());
        let mismatched = ModelSpec {
            kind: ModelKind::Knn,
            ..ModelSpec::new(ModelKind::Gnb)
        };
        assert!(mismatched.validate().is_err());
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..13).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..13).map(|i| (i * i) as f64 * 0.25).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0]), 0);
    }
}
