//! Adam, mini-batch training with validation early stopping, and first-order
//! MAML meta-initialization.

mod adam;
mod maml;

use std::sync::atomic::{AtomicBool, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use maml::{maml_init, MamlConfig};

use crate::error::{Error, Result};
use crate::loss::{Forecaster, LossKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub loss_kind: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            patience: 30,
            max_epochs: 500,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            loss_kind: LossKind::Mae,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0,1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub params: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
    /// Set when the run stopped because the interrupt flag was raised.
    pub interrupted: bool,
}

/// Writes `epoch,train_loss,val_loss` rows.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for r in history {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
    }
    out
}

/// Hooks into a training run.
pub struct TrainHooks<'a, M> {
    /// Called with the model after every optimizer step.
    pub on_step: Option<&'a mut dyn FnMut(&M)>,
    /// Checked between batches; a raised flag ends the run with the best
    /// parameters so far.
    pub interrupt: Option<&'a AtomicBool>,
}

impl<M> Default for TrainHooks<'_, M> {
    fn default() -> Self {
        Self {
            on_step: None,
            interrupt: None,
        }
    }
}

pub fn train<M: Forecaster>(
    model: &mut M,
    train_set: &[M::Sample],
    val_set: &[M::Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome>
where
    M::Sample: Clone,
{
    train_with_hooks(model, train_set, val_set, cfg, TrainHooks::default())
}

/// Mini-batch Adam with per-epoch reshuffling and validation early stopping.
///
/// Training stops once `patience` consecutive epochs fail to improve the best
/// validation loss, or after `max_epochs`. The model is left holding the best
/// validation parameters.
pub fn train_with_hooks<M: Forecaster>(
    model: &mut M,
    train_set: &[M::Sample],
    val_set: &[M::Sample],
    cfg: &TrainConfig,
    mut hooks: TrainHooks<'_, M>,
) -> Result<TrainOutcome>
where
    M::Sample: Clone,
{
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let kind = cfg.loss_kind;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<M::Sample> = train_set.to_vec();
    let mut params = model.params();
    let mut adam = AdamState::new(params.len());
    let mut best = (f64::INFINITY, params.clone(), 0);
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut interrupted = false;

    'epochs: for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            if hooks.interrupt.is_some_and(|f| f.load(Ordering::Relaxed)) {
                interrupted = true;
                break 'epochs;
            }
            let (loss, grad) = match model.loss_and_grad(batch, kind) {
                Err(Error::AllMasked) => continue,
                r => r?,
            };
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("batch loss {loss}"),
                });
            }
            adam_step(&mut adam, &mut params, &grad, cfg).map_err(|e| Error::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
            model.set_params(&params).map_err(|e| Error::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
            if let Some(f) = hooks.on_step.as_mut() {
                f(model);
            }
        }
        let train_loss = model.loss(train_set, kind)?;
        let val_loss = model.loss(val_set, kind)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("train loss {train_loss}, validation loss {val_loss}"),
            });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (best_val_loss, best_params, best_epoch) = best;
    let params = if best_epoch == 0 { model.params() } else { best_params };
    model.set_params(&params)?;
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_val_loss,
        history,
        interrupted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar model `y = w * x` with a scripted validation curve.
    #[derive(Clone)]
    struct Scripted {
        w: f64,
        val_curve: std::sync::Arc<std::sync::Mutex<Vec<f64>>>,
    }

    #[derive(Clone)]
    enum S {
        Train(f64, f64),
        Val,
    }

    impl Forecaster for Scripted {
        type Sample = S;
        fn num_params(&self) -> usize {
            1
        }
        fn params(&self) -> Vec<f64> {
            vec![self.w]
        }
        fn set_params(&mut self, p: &[f64]) -> Result<()> {
            self.w = p[0];
            Ok(())
        }
        fn loss(&self, s: &[S], _: LossKind) -> Result<f64> {
            if matches!(s[0], S::Val) {
                let mut c = self.val_curve.lock().unwrap();
                return Ok(if c.is_empty() { 0.0 } else { c.remove(0) });
            }
            Ok(s.iter()
                .map(|s| match *s {
                    S::Train(x, y) => (self.w * x - y).powi(2),
                    S::Val => 0.0,
                })
                .sum::<f64>()
                / s.len() as f64)
        }
        fn loss_and_grad(&self, s: &[S], k: LossKind) -> Result<(f64, Vec<f64>)> {
            let g = s
                .iter()
                .map(|s| match *s {
                    S::Train(x, y) => 2.0 * (self.w * x - y) * x,
                    S::Val => 0.0,
                })
                .sum::<f64>()
                / s.len() as f64;
            Ok((self.loss(s, k)?, vec![g]))
        }
    }

    fn scripted(curve: Vec<f64>) -> Scripted {
        Scripted {
            w: 0.0,
            val_curve: std::sync::Arc::new(std::sync::Mutex::new(curve)),
        }
    }

    #[test]
    fn increasing_validation_stops_after_patience() {
        let cfg = TrainConfig {
            patience: 4,
            max_epochs: 100,
            ..TrainConfig::default()
        };
        let mut m = scripted((1..=100).map(f64::from).collect());
        let out = train(&mut m, &[S::Train(1.0, 2.0)], &[S::Val], &cfg).unwrap();
        assert_eq!(out.history.len(), 1 + 4);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn patience_beyond_max_epochs_runs_all() {
        let cfg = TrainConfig {
            patience: 50,
            max_epochs: 7,
            ..TrainConfig::default()
        };
        let mut m = scripted((1..=100).map(f64::from).collect());
        let out = train(&mut m, &[S::Train(1.0, 2.0)], &[S::Val], &cfg).unwrap();
        assert_eq!(out.history.len(), 7);
    }

    #[test]
    fn returns_best_validation_params() {
        let cfg = TrainConfig {
            patience: 3,
            max_epochs: 20,
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let curve = vec![5.0, 4.0, 1.0, 3.0, 2.0, 6.0, 7.0];
        let mut m = scripted(curve);
        let out = train(&mut m, &[S::Train(1.0, 2.0)], &[S::Val], &cfg).unwrap();
        assert_eq!(out.best_epoch, 3);
        assert_eq!(out.best_val_loss, 1.0);
        assert!(out.history.iter().all(|r| r.val_loss >= out.best_val_loss));
        assert_eq!(m.w, out.params[0]);
        // Three Adam steps of size ~lr from w = 0 towards 2.
        assert!((out.params[0] - 0.3).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_config_and_empty_sets() {
        let mut m = scripted(vec![]);
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(train(&mut m, &[S::Train(1.0, 1.0)], &[S::Val], &bad).is_err());
        assert!(train(&mut m, &[], &[S::Val], &TrainConfig::default()).is_err());
    }

    #[test]
    fn interrupt_flag_ends_run() {
        let flag = AtomicBool::new(true);
        let mut m = scripted(vec![]);
        let hooks = TrainHooks {
            on_step: None,
            interrupt: Some(&flag),
        };
        let out = train_with_hooks(&mut m, &[S::Train(1.0, 1.0)], &[S::Val], &TrainConfig::default(), hooks).unwrap();
        assert!(out.interrupted);
        assert!(out.history.is_empty());
    }

    #[test]
    fn history_csv_header() {
        let csv = history_csv(&[EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_loss: 0.25,
        }]);
        assert_eq!(csv, "epoch,train_loss,val_loss\n1,0.5,0.25\n");
    }
}
