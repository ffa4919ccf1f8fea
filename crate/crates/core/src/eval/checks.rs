//! Statistical checks of the symmetry and negative-correlation assumptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pass thresholds, reported alongside every result.
pub const STANDARD_ERRORS: f64 = 3.0;
pub const MAX_ABS_SKEWNESS: f64 = 0.5;
pub const MIN_SAMPLES: usize = 30;
const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges from the minimum to the maximum sample.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub samples: usize,
    pub mean: f64,
    pub median: f64,
    pub std_dev: f64,
    pub mean_standard_error: f64,
    /// Large-sample standard error of the median, `sqrt(pi/2)` times that of the mean.
    pub median_standard_error: f64,
    pub skewness: f64,
    pub histogram: Histogram,
    pub mean_ok: bool,
    pub median_ok: bool,
    pub skewness_ok: bool,
    pub passed: bool,
    pub rule: String,
}

fn mean_and_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0);
    (m, var.sqrt())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn histogram(v: &[f64]) -> Histogram {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let edges = (0..=HISTOGRAM_BINS).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0; HISTOGRAM_BINS];
    for &x in v {
        let k = (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

/// Tests whether residuals look symmetric about zero: mean and median each
/// within three standard errors of zero and `|skewness| < 0.5`.
pub fn check_symmetry(residuals: &[f64]) -> Result<SymmetryReport> {
    if residuals.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: residuals.len(),
        });
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParams("non-finite residual".into()));
    }
    let k = residuals.len() as f64;
    let (mean, sd) = mean_and_sd(residuals);
    let med = median(residuals);
    let se = sd / k.sqrt();
    let med_se = (std::f64::consts::PI / 2.0).sqrt() * se;
    let m2 = residuals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    let m3 = residuals.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / k;
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    let mean_ok = mean.abs() <= STANDARD_ERRORS * se;
    let median_ok = med.abs() <= STANDARD_ERRORS * med_se;
    let skewness_ok = skewness.abs() < MAX_ABS_SKEWNESS;
    Ok(SymmetryReport {
        samples: residuals.len(),
        mean,
        median: med,
        std_dev: sd,
        mean_standard_error: se,
        median_standard_error: med_se,
        skewness,
        histogram: histogram(residuals),
        mean_ok,
        median_ok,
        skewness_ok,
        passed: mean_ok && median_ok && skewness_ok,
        rule: format!(
            "|mean| and |median| within {STANDARD_ERRORS} standard errors of 0, |skewness| < {MAX_ABS_SKEWNESS}, at least {MIN_SAMPLES} samples"
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub samples: usize,
    /// Empirical `E[g_s g_t]`.
    pub mean_product: f64,
    pub standard_error: f64,
    pub passed: bool,
    pub rule: String,
}

/// Tests `E[g_s g_t] <= 0`: passes when the mean product is at most one
/// standard error above zero.
pub fn check_negative_correlation(g_s: &[f64], g_t: &[f64]) -> Result<CorrelationReport> {
    if g_s.len() != g_t.len() {
        return Err(Error::Dimension {
            what: "paired pattern samples",
            expected: g_s.len(),
            got: g_t.len(),
        });
    }
    if g_s.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: g_s.len(),
        });
    }
    let products: Vec<f64> = g_s.iter().zip(g_t).map(|(a, b)| a * b).collect();
    let (mean, sd) = mean_and_sd(&products);
    let se = sd / (products.len() as f64).sqrt();
    Ok(CorrelationReport {
        samples: products.len(),
        mean_product: mean,
        standard_error: se,
        passed: mean <= se,
        rule: "mean product at most one standard error above 0".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_positive_fails() {
        let r = check_symmetry(&[2.0; 40]).unwrap();
        assert!(!r.passed && !r.median_ok);
    }

    #[test]
    fn antisymmetric_set_has_zero_mean() {
        let a: Vec<f64> = (1..=20).map(|k| (k as f64).powi(2)).collect();
        let v: Vec<f64> = a.iter().map(|x| -x).chain(a.iter().copied()).collect();
        let r = check_symmetry(&v).unwrap();
        assert_eq!(r.mean, 0.0);
        assert!(r.mean_ok && r.passed);
    }

    #[test]
    fn too_few() {
        assert!(matches!(check_symmetry(&[0.0; 29]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let r = check_symmetry(&v).unwrap();
        assert_eq!(r.histogram.counts.iter().sum::<usize>(), 100);
        assert_eq!(r.histogram.edges.len(), 21);
    }

    #[test]
    fn correlation_cases() {
        let g: Vec<f64> = (0..50).map(|k| (k as f64 * 0.7).sin()).collect();
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        assert!(check_negative_correlation(&g, &neg).unwrap().passed);
        let same = check_negative_correlation(&g, &g).unwrap();
        assert!(!same.passed && same.mean_product > 0.0);
        assert!(check_negative_correlation(&g, &g[1..]).is_err());
    }
}
