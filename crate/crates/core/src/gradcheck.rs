//! Finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Pair;
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, EdgeWeights};
use crate::loss::{Forecaster, LossKind};
use crate::rdgcn::{RdModel, RdParams};
use crate::sirgcn::{SirModel, SirParams, SirSample, SirState};

/// `|a - f| / max(|a|, |f|, 1e-3)`. The floor keeps vanishing coordinates
/// from turning round-off into large relative errors.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordinateCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub coords: Vec<CoordinateCheck>,
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error, if any.
    pub worst: Option<usize>,
}

/// Compares `loss_and_grad` against central differences of `loss`.
///
/// `corrupt` adds 1 to one analytic coordinate before comparing; it exists
/// to exercise the failure path.
pub fn check_gradient<M: Forecaster>(
    model: &M,
    samples: &[M::Sample],
    kind: LossKind,
    step: f64,
    corrupt: Option<usize>,
) -> Result<GradCheck> {
    let (_, mut grad) = model.loss_and_grad(samples, kind)?;
    if let Some(k) = corrupt.filter(|&k| k < grad.len()) {
        grad[k] += 1.0;
    }
    let theta = model.params();
    let mut probe = model.clone();
    let mut coords = Vec::with_capacity(theta.len());
    for (index, &analytic) in grad.iter().enumerate() {
        let mut shifted = theta.clone();
        shifted[index] = theta[index] + step;
        probe.set_params(&shifted)?;
        let up = probe.loss(samples, kind)?;
        shifted[index] = theta[index] - step;
        probe.set_params(&shifted)?;
        let down = probe.loss(samples, kind)?;
        let numeric = (up - down) / (2.0 * step);
        coords.push(CoordinateCheck {
            index,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric),
        });
    }
    let worst = coords
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .map(|c| c.index);
    Ok(GradCheck {
        max_rel_error: worst.map_or(0.0, |w| coords[w].rel_error),
        worst,
        coords,
    })
}

/// Random graph on `n` vertices: each unordered pair gets one edge with
/// probability 0.4, in a random direction.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> DirectedGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.4) {
                edges.push(if rng.random_bool(0.5) { (a, b) } else { (b, a) });
            }
        }
    }
    DirectedGraph::new(n, edges).expect("no self-loops or duplicates")
}

/// A small RDGCN with random parameters and three partially masked pairs.
pub fn random_rd_instance(rng: &mut ChaCha8Rng, max_n: usize) -> (RdModel, Vec<Pair>) {
    let n = rng.random_range(1..=max_n.max(1));
    let g = random_graph(rng, n);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let params = RdParams {
        rho: EdgeWeights::new((0..g.num_edges()).map(|_| u(-0.5, 0.5)).collect(), &g).expect("finite"),
        sigma: EdgeWeights::new((0..g.num_edges()).map(|_| u(-0.5, 0.5)).collect(), &g).expect("finite"),
        b_d: (0..n).map(|_| u(-0.5, 0.5)).collect(),
        b_r: (0..n).map(|_| u(-0.5, 0.5)).collect(),
    };
    let pairs = (0..3)
        .map(|t| {
            let mut p = Pair::fully_observed(t, (0..n).map(|_| u(-1.0, 1.0)).collect(), (0..n).map(|_| u(-1.0, 1.0)).collect());
            for i in 0..n {
                p.input_mask[i] = u(0.0, 1.0) > 0.1;
                p.target_mask[i] = u(0.0, 1.0) > 0.1;
            }
            p.input_mask[0] = true;
            p.target_mask[0] = true;
            p
        })
        .collect();
    (RdModel::new(g, params).expect("shapes match"), pairs)
}

/// A small SIRGCN with random raw parameters and three samples whose
/// susceptible counts stay positive.
pub fn random_sir_instance(rng: &mut ChaCha8Rng, max_n: usize) -> (SirModel, Vec<SirSample>) {
    let n = rng.random_range(1..=max_n.max(1));
    let g = random_graph(rng, n);
    let single_beta = n > 1 && rng.random_bool(0.3);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let params = SirParams {
        phi_raw: (0..g.num_edges()).map(|_| u(-3.0, 1.0)).collect(),
        beta_raw: (0..if single_beta { 1 } else { n }).map(|_| u(-2.0, 2.0)).collect(),
        gamma_raw: u(-2.0, 2.0),
        single_beta,
    };
    let samples = (0..3)
        .map(|t| {
            let state = SirState {
                population: (0..n).map(|_| u(50.0, 200.0)).collect(),
                recovered_offset: (0..n).map(|_| u(0.0, 20.0)).collect(),
                t0: 0,
                t,
                cumulative_infectious: (0..n).map(|_| u(0.0, 5.0)).collect(),
            };
            let pair = Pair::fully_observed(t, (0..n).map(|_| u(1.0, 20.0)).collect(), (0..n).map(|_| u(1.0, 20.0)).collect());
            SirSample { state, pair }
        })
        .collect();
    (SirModel::new(g, params).expect("shapes match"), samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub instances: usize,
    pub max_n: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Test hook: corrupt this analytic coordinate in every instance.
    pub corrupt_coordinate: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            max_n: 8,
            step: 1e-5,
            tolerance: 1e-5,
            seed: 0,
            corrupt_coordinate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySummary {
    pub family: String,
    pub instances: usize,
    pub coordinates: usize,
    pub failed_coordinates: usize,
    pub max_rel_error: f64,
    pub worst_instance: Option<usize>,
    pub worst_coordinate: Option<usize>,
    pub passed: bool,
}

fn summarize(family: &str, checks: Vec<GradCheck>, tolerance: f64) -> FamilySummary {
    let mut s = FamilySummary {
        family: family.into(),
        instances: checks.len(),
        coordinates: 0,
        failed_coordinates: 0,
        max_rel_error: 0.0,
        worst_instance: None,
        worst_coordinate: None,
        passed: true,
    };
    for (k, c) in checks.iter().enumerate() {
        s.coordinates += c.coords.len();
        s.failed_coordinates += c.coords.iter().filter(|x| !(x.rel_error <= tolerance)).count();
        if c.worst.is_some() && (s.worst_instance.is_none() || c.max_rel_error > s.max_rel_error) {
            s.max_rel_error = c.max_rel_error;
            s.worst_instance = Some(k);
            s.worst_coordinate = c.worst;
        }
    }
    s.passed = s.failed_coordinates == 0;
    s
}

/// Checks `instances` random RDGCN and SIRGCN instances under MSE.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<Vec<FamilySummary>> {
    if cfg.instances == 0 || cfg.max_n == 0 || !(cfg.step > 0.0) || !(cfg.tolerance > 0.0) {
        return Err(Error::Config("gradcheck needs positive instances, max_n, step and tolerance".into()));
    }
    let rng_for = |family: u64, k: usize| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        r.set_stream(family);
        r
    };
    let rd = (0..cfg.instances)
        .into_par_iter()
        .map(|k| {
            let (m, s) = random_rd_instance(&mut rng_for(1, k), cfg.max_n);
            check_gradient(&m, &s, LossKind::Mse, cfg.step, cfg.corrupt_coordinate)
        })
        .collect::<Result<Vec<_>>>()?;
    let sir = (0..cfg.instances)
        .into_par_iter()
        .map(|k| {
            let (m, s) = random_sir_instance(&mut rng_for(2, k), cfg.max_n);
            check_gradient(&m, &s, LossKind::Mse, cfg.step, cfg.corrupt_coordinate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![summarize("rdgcn", rd, cfg.tolerance), summarize("sirgcn", sir, cfg.tolerance)])
}

/// Aligned text table of family summaries.
pub fn gradcheck_table(rows: &[FamilySummary], tolerance: f64) -> String {
    let mut out = format!(
        "{:<8} {:>9} {:>11} {:>7} {:>13} {:>14}  status (tolerance {tolerance:e})\n",
        "family", "instances", "coordinates", "failed", "max rel err", "worst (inst,k)"
    );
    for r in rows {
        let worst = match (r.worst_instance, r.worst_coordinate) {
            (Some(i), Some(k)) => format!("({i},{k})"),
            _ => "-".into(),
        };
        out.push_str(&format!(
            "{:<8} {:>9} {:>11} {:>7} {:>13.3e} {:>14}  {}\n",
            r.family,
            r.instances,
            r.coordinates,
            r.failed_coordinates,
            r.max_rel_error,
            worst,
            if r.passed { "PASS" } else { "FAIL" }
        ));
    }
    out
}
