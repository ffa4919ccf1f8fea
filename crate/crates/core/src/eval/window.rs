//! Ridge regression on a window of full-graph history.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Pair, TimeSeriesTable};
use crate::error::{Error, Result};
use crate::loss::LossKind;

/// A `T`-row history of every vertex and the next-step target.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    /// Row index of the newest history row.
    pub t: usize,
    /// Rows `t-T+1 ..= t`, oldest first; missing cells hold 0.
    pub history: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    /// Scored outputs, the same rule as for one-step pairs.
    pub mask: Vec<bool>,
}

/// Window samples for the pairs whose input row has `window - 1` predecessors.
pub fn window_samples(table: &TimeSeriesTable, pairs: &[Pair], window: usize) -> Vec<WindowSample> {
    pairs
        .iter()
        .filter(|p| p.t + 1 >= window)
        .map(|p| WindowSample {
            t: p.t,
            history: (p.t + 1 - window..=p.t)
                .map(|s| {
                    table
                        .row(s)
                        .iter()
                        .zip(table.row_mask(s))
                        .map(|(&v, &m)| if m { v } else { 0.0 })
                        .collect()
                })
                .collect(),
            target: p.target.clone(),
            mask: (0..p.target.len()).map(|i| p.usable(i)).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRegressor {
    pub window: usize,
    pub ridge_lambda: f64,
    /// One row per output vertex over `[flattened history, 1]`.
    pub coefficients: Vec<Vec<f64>>,
}

fn features(history: &[Vec<f64>]) -> Vec<f64> {
    let mut f: Vec<f64> = history.iter().flatten().copied().collect();
    f.push(1.0);
    f
}

impl WindowRegressor {
    /// Minimizes `sum_s m_si (w_i . f_s - y_si)^2 + lambda |w_i|^2` for every
    /// output `i`, intercept included in the penalty.
    pub fn fit(samples: &[WindowSample], window: usize, ridge_lambda: f64) -> Result<Self> {
        if window < 2 {
            return Err(Error::Config("window length must be at least 2".into()));
        }
        if !(ridge_lambda >= 0.0) {
            return Err(Error::Config("ridge_lambda must be nonnegative".into()));
        }
        let first = samples.first().ok_or(Error::EmptyBatch)?;
        let n = first.target.len();
        let d = window * n + 1;
        for s in samples {
            if s.history.len() != window || s.history.iter().any(|r| r.len() != n) || s.mask.len() != n {
                return Err(Error::Dimension {
                    what: "window sample",
                    expected: window * n,
                    got: s.history.iter().map(Vec::len).sum(),
                });
            }
        }
        let mut x = DMatrix::zeros(samples.len(), d);
        for (r, s) in samples.iter().enumerate() {
            x.set_row(r, &DVector::from_vec(features(&s.history)).transpose());
        }
        let all_observed = samples.iter().all(|s| s.mask.iter().all(|&m| m));
        let mut coefficients = Vec::with_capacity(n);
        let shared = if all_observed { Some(gram_factor(&x, None, ridge_lambda)?) } else { None };
        for i in 0..n {
            let weights: Vec<f64> = samples.iter().map(|s| if s.mask[i] { 1.0 } else { 0.0 }).collect();
            let y = DVector::from_fn(samples.len(), |r, _| weights[r] * samples[r].target[i]);
            let rhs = x.transpose() * y;
            let sol = match &shared {
                Some(chol) => chol.solve(&rhs),
                None => gram_factor(&x, Some(&weights), ridge_lambda)?.solve(&rhs),
            };
            coefficients.push(sol.iter().copied().collect());
        }
        Ok(Self {
            window,
            ridge_lambda,
            coefficients,
        })
    }

    pub fn predict(&self, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        let f = features(history);
        if history.len() != self.window || f.len() != self.coefficients.first().map_or(0, Vec::len) {
            return Err(Error::Dimension {
                what: "window history",
                expected: self.coefficients.first().map_or(0, Vec::len),
                got: f.len(),
            });
        }
        Ok(self
            .coefficients
            .iter()
            .map(|w| w.iter().zip(&f).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Masked predictions, `None` where an output is not scored.
    pub fn predict_sample(&self, s: &WindowSample) -> Result<Vec<Option<f64>>> {
        let p = self.predict(&s.history)?;
        Ok(p.into_iter().zip(&s.mask).map(|(v, &m)| m.then_some(v)).collect())
    }

    pub fn loss(&self, samples: &[WindowSample], kind: LossKind) -> Result<f64> {
        let (mut total, mut count) = (0.0, 0usize);
        for s in samples {
            for (p, (y, &m)) in self.predict(&s.history)?.iter().zip(s.target.iter().zip(&s.mask)) {
                if m {
                    total += kind.value(p - y);
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(Error::AllMasked);
        }
        Ok(total / count as f64)
    }
}

/// Cholesky factor of `X^T W X + lambda I`; a vanishing pivot means the
/// system is singular.
fn gram_factor(
    x: &DMatrix<f64>,
    weights: Option<&[f64]>,
    lambda: f64,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut gram = match weights {
        None => x.transpose() * x,
        Some(w) => {
            let scaled = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] * w[r]);
            x.transpose() * scaled
        }
    };
    for k in 0..gram.nrows() {
        gram[(k, k)] += lambda;
    }
    let scale = gram.diagonal().iter().copied().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let chol = gram.cholesky().ok_or(Error::Singular("ridge normal equations".into()))?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-12 * scale {
        return Err(Error::Singular(format!("ridge normal equations, smallest pivot {min_pivot:e}")));
    }
    Ok(chol)
}
