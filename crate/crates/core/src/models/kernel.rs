use serde::{Deserialize, Serialize};

use super::{dot, ModelKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    /// `(gamma * x.z + 1)^3`
    Cubic,
    /// `exp(-gamma * |x - z|^2)`
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, gamma: f64) -> Self {
        Self { kind, gamma }
    }

    /// Kernel for an SVM model kind; `gamma = None` selects `1 / dim`.
    pub fn for_model(kind: ModelKind, gamma: Option<f64>, dim: usize) -> Result<Self> {
        let kernel_kind = match kind {
            ModelKind::LinearSvm => KernelKind::Linear,
            ModelKind::CubicSvm => KernelKind::Cubic,
            ModelKind::RbfSvm => KernelKind::Rbf,
            other => return Err(Error::invalid(format!("{other} is not a kernel machine"))),
        };
        if dim == 0 {
            return Err(Error::invalid("kernel on zero-dimensional data"));
        }
        Ok(Self::new(kernel_kind, gamma.unwrap_or(1.0 / dim as f64)))
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if x.len() != z.len() {
            return Err(Error::invalid(format!("kernel dimension mismatch: {} vs {}", x.len(), z.len())));
        }
        Ok(self.from_dot(dot(x, z), dot(x, x), dot(z, z)))
    }

    /// Evaluates the kernel from `x.z`, `x.x` and `z.z`.
    pub fn from_dot(&self, xz: f64, xx: f64, zz: f64) -> f64 {
        match self.kind {
            KernelKind::Linear => xz,
            KernelKind::Cubic => (self.gamma * xz + 1.0).powi(3),
            KernelKind::Rbf => (-self.gamma * (xx + zz - 2.0 * xz).max(0.0)).exp(),
        }
    }
}
