use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

use super::TrainConfig;

/// Moment accumulators for a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// A gradient with a non-finite entry is rejected before any state changes.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) -> Result<()> {
    check_len("adam gradient", params.len(), grad.len())?;
    check_len("adam state", params.len(), state.m.len())?;
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    if !(cfg.adam_epsilon > 0.0) {
        return Err(Error::Config("adam_epsilon must be positive".into()));
    }
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    state.step += 1;
    let bc1 = 1.0 - b1.powi(state.step as i32);
    let bc2 = 1.0 - b2.powi(state.step as i32);
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + cfg.adam_epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let cfg = TrainConfig::default();
        let mut st = AdamState {
            m: vec![0.5],
            v: vec![0.25],
            step: 3,
        };
        let mut p = vec![1.0];
        adam_step(&mut st, &mut p, &[0.0], &cfg).unwrap();
        // Prior momentum keeps the parameter moving; a fresh state stays put.
        assert_eq!(st.m, vec![0.5 * 0.9]);
        assert_eq!(st.v, vec![0.25 * 0.999]);
        let mut fresh = AdamState::new(1);
        let mut q = vec![1.0];
        adam_step(&mut fresh, &mut q, &[0.0], &cfg).unwrap();
        assert_eq!(q, vec![1.0]);
        assert_eq!(fresh.step, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = TrainConfig::default();
        for g in [3.0, -0.02, 1e-3] {
            let mut st = AdamState::new(1);
            let mut p = vec![0.0];
            adam_step(&mut st, &mut p, &[g], &cfg).unwrap();
            // m_hat = g, v_hat = g^2 after bias correction.
            let expected = -cfg.learning_rate * g / ((g * g).sqrt() + cfg.adam_epsilon);
            assert!((p[0] - expected).abs() < 1e-15);
            assert!((p[0].abs() - cfg.learning_rate).abs() < 1e-7);
        }
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let f = |x: f64| (x - 3.0) * (x - 3.0);
        let mut st = AdamState::new(1);
        let mut x = vec![0.0];
        let mut last = f(x[0]);
        for _ in 0..2 {
            let g = 2.0 * (x[0] - 3.0);
            adam_step(&mut st, &mut x, &[g], &cfg).unwrap();
            assert!(f(x[0]) < last);
            last = f(x[0]);
        }
    }

    #[test]
    fn rejects_non_finite_and_mismatched() {
        let cfg = TrainConfig::default();
        let mut st = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        assert!(matches!(
            adam_step(&mut st, &mut p, &[1.0, f64::NAN], &cfg),
            Err(Error::NonFiniteGradient { index: 1 })
        ));
        assert_eq!(st.step, 0);
        assert!(adam_step(&mut st, &mut p, &[1.0], &cfg).is_err());
        let bad = TrainConfig {
            adam_epsilon: 0.0,
            ..TrainConfig::default()
        };
        assert!(adam_step(&mut st, &mut p, &[1.0, 1.0], &bad).is_err());
    }
}
