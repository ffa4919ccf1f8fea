use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mae,
    Mse,
}

impl LossKind {
    pub fn value(self, residual: f64) -> f64 {
        match self {
            LossKind::Mae => residual.abs(),
            LossKind::Mse => residual * residual,
        }
    }

    /// Derivative of [`LossKind::value`] in the residual. The MAE subgradient
    /// at zero is 0.
    pub fn derivative(self, residual: f64) -> f64 {
        match self {
            LossKind::Mae => {
                if residual > 0.0 {
                    1.0
                } else if residual < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::Mse => 2.0 * residual,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mae => "mae",
            LossKind::Mse => "mse",
        })
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mae" | "l1" => Ok(LossKind::Mae),
            "mse" => Ok(LossKind::Mse),
            other => Err(format!("unknown loss `{other}` (expected mae or mse)")),
        }
    }
}

/// A model trained through a flat parameter vector.
///
/// `loss` is the masked mean over every included (sample, vertex) entry and
/// `loss_and_grad` returns its exact gradient with respect to `params()`.
pub trait Forecaster: Clone + Send + Sync {
    type Sample: Send + Sync;

    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<()>;
    fn loss(&self, samples: &[Self::Sample], kind: LossKind) -> Result<f64>;
    fn loss_and_grad(&self, samples: &[Self::Sample], kind: LossKind) -> Result<(f64, Vec<f64>)>;
}
