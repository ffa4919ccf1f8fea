use serde::{Deserialize, Serialize};

use crate::data::Pair;
use crate::error::{check_len, Error, Result};

fn masked<'a>(pred: &'a [f64], target: &'a [f64], mask: &'a [bool]) -> Result<impl Iterator<Item = f64> + 'a> {
    check_len("target", pred.len(), target.len())?;
    check_len("mask", pred.len(), mask.len())?;
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked);
    }
    Ok(pred
        .iter()
        .zip(target)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((p, t), _)| p - t))
}

pub fn mae(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<f64> {
    let (sum, k) = masked(pred, target, mask)?.fold((0.0, 0usize), |(s, k), d| (s + d.abs(), k + 1));
    Ok(sum / k as f64)
}

pub fn rmse(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<f64> {
    let (sum, k) = masked(pred, target, mask)?.fold((0.0, 0usize), |(s, k), d| (s + d * d, k + 1));
    Ok((sum / k as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    /// Predictions that were scored.
    pub count: usize,
    /// Predictions removed because the input or target was missing.
    pub dropped: usize,
}

impl MetricsReport {
    /// Scores `(prediction, target)` entries; `None` predictions are dropped.
    pub fn from_entries(entries: impl IntoIterator<Item = (Option<f64>, f64)>) -> Result<Self> {
        let (mut abs, mut sq, mut count, mut dropped) = (0.0, 0.0, 0usize, 0usize);
        for (pred, target) in entries {
            match pred {
                Some(p) => {
                    let d = p - target;
                    abs += d.abs();
                    sq += d * d;
                    count += 1;
                }
                None => dropped += 1,
            }
        }
        if count == 0 {
            return Err(Error::AllMasked);
        }
        let mae = abs / count as f64;
        // Guard the Cauchy-Schwarz ordering against the last-bit rounding of sqrt.
        let rmse = (sq / count as f64).sqrt().max(mae);
        Ok(Self {
            mae,
            rmse,
            count,
            dropped,
        })
    }

    /// Scores masked per-pair predictions (`None` where not scored).
    pub fn from_predictions(preds: &[Vec<Option<f64>>], pairs: &[Pair]) -> Result<Self> {
        check_len("predictions", pairs.len(), preds.len())?;
        Self::from_entries(
            preds
                .iter()
                .zip(pairs)
                .flat_map(|(row, p)| row.iter().copied().zip(p.target.iter().copied())),
        )
    }
}

/// Mean absolute error of each pair's scored entries, `None` when a pair has
/// nothing scored.
pub fn per_pair_mae(preds: &[Vec<Option<f64>>], pairs: &[Pair]) -> Vec<Option<f64>> {
    preds
        .iter()
        .zip(pairs)
        .map(|(row, p)| {
            let errs: Vec<f64> = row
                .iter()
                .zip(&p.target)
                .filter_map(|(q, t)| q.map(|q| (q - t).abs()))
                .collect();
            (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
        })
        .collect()
}
