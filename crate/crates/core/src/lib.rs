//! Power-quality event benchmark toolkit.
//!
//! The pipeline has five stages, each in its own module:
//!
//! - [`synth`] simulates a two-bus three-phase transmission circuit with a
//!   trapezoidal companion-model solver and produces labeled 4 kHz records
//!   for the 13 event classes (eleven fault types plus line energizing and
//!   de-energizing).
//! - [`wavelet`] decomposes each channel with a 5-level db4 transform.
//! - [`features`] reduces the 36 subbands of a record to 288 statistics and
//!   fits the z-score normalizer.
//! - [`models`] holds the nine classifiers (SMO-trained SVMs with linear,
//!   cubic and RBF kernels, softmax gradient boosting, logistic regression,
//!   k-nearest neighbours, CART, random forest and Gaussian naive Bayes).
//! - [`eval`] builds confusion matrices, per-class metrics, the leaderboard
//!   and the SVG heatmap.
//!
//! [`dataio`] defines the on-disk formats shared by the command-line tool.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod rng;
pub mod synth;
pub mod wavelet;

pub use error::{Error, Result};
pub use synth::EventClass;
