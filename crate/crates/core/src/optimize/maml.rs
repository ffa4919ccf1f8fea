use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{Forecaster, LossKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MamlConfig {
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub iterations: usize,
}

impl Default for MamlConfig {
    fn default() -> Self {
        Self {
            inner_lr: 0.00005,
            outer_lr: 0.0005,
            iterations: 200,
        }
    }
}

impl MamlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_lr >= 0.0) || !(self.outer_lr > 0.0) {
            return Err(Error::Config("MAML rates must be positive".into()));
        }
        Ok(())
    }
}

/// First-order MAML.
///
/// Each task is split in half: the first half is the support set, the second
/// the query set. Every iteration adapts the current parameters with one
/// gradient step on each support set, evaluates the query gradient at the
/// adapted parameters, and moves the shared initialization against the mean
/// query gradient. The model is left holding the meta-learned parameters,
/// which are also returned.
pub fn maml_init<M: Forecaster>(
    model: &mut M,
    tasks: &[Vec<M::Sample>],
    cfg: &MamlConfig,
    kind: LossKind,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    for (task, samples) in tasks.iter().enumerate() {
        if samples.len() < 2 {
            return Err(Error::TaskTooSmall {
                task,
                len: samples.len(),
            });
        }
    }
    let mut theta = model.params();
    if tasks.is_empty() {
        return Ok(theta);
    }
    let mut scratch = model.clone();
    for _ in 0..cfg.iterations {
        let mut meta_grad = vec![0.0; theta.len()];
        for samples in tasks {
            let (support, query) = samples.split_at(samples.len() / 2);
            scratch.set_params(&theta)?;
            let (_, g_support) = scratch.loss_and_grad(support, kind)?;
            let adapted: Vec<f64> = theta.iter().zip(&g_support).map(|(p, g)| p - cfg.inner_lr * g).collect();
            scratch.set_params(&adapted)?;
            let (_, g_query) = scratch.loss_and_grad(query, kind)?;
            for (m, g) in meta_grad.iter_mut().zip(&g_query) {
                *m += g / tasks.len() as f64;
            }
        }
        if let Some(index) = meta_grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        for (p, g) in theta.iter_mut().zip(&meta_grad) {
            *p -= cfg.outer_lr * g;
        }
    }
    model.set_params(&theta)?;
    Ok(theta)
}
