//! Reaction-diffusion forecaster for directed traffic-sensor graphs.
//!
//! One forward-Euler step of
//!
//! ```text
//! dx_i/dt = sum_{(i,j) in E^d} rho_(i,j) (x_j - x_i) + b^d_i
//!         + tanh( sum_{(i,j) in E^r} sigma_(i,j) (x_j - x_i) + b^r_i )
//! ```
//!
//! where `E^r` is the transpose of the diffusion graph `E^d`. Reaction edge
//! `k` is the reverse of diffusion edge `k`, so `sigma[k]` pairs with `rho[k]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Pair, TimeSeriesTable};
use crate::error::{check_len, Error, Result};
use crate::graph::{apply_weighted_laplacian, DirectedGraph, EdgeWeights};
use crate::loss::{Forecaster, LossKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdParams {
    /// Diffusion weights over `E^d`.
    pub rho: EdgeWeights,
    /// Reaction weights over `E^r`.
    pub sigma: EdgeWeights,
    pub b_d: Vec<f64>,
    pub b_r: Vec<f64>,
}

impl RdParams {
    pub fn zeros(g: &DirectedGraph) -> Self {
        Self {
            rho: EdgeWeights::zeros(g),
            sigma: EdgeWeights::zeros(g),
            b_d: vec![0.0; g.n()],
            b_r: vec![0.0; g.n()],
        }
    }

    /// Edge weights uniform in (-0.1, 0.1), zero biases.
    pub fn init_random(g: &DirectedGraph, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(g);
        for w in p.rho.as_mut_slice().iter_mut().chain(p.sigma.as_mut_slice()) {
            *w = rng.random_range(-0.1..0.1);
        }
        p
    }

    pub fn validate(&self, g: &DirectedGraph) -> Result<()> {
        check_len("rho", g.num_edges(), self.rho.len())?;
        check_len("sigma", g.num_edges(), self.sigma.len())?;
        check_len("b_d", g.n(), self.b_d.len())?;
        check_len("b_r", g.n(), self.b_r.len())?;
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite RD parameter".into()));
        }
        Ok(())
    }

    /// `2|E| + 2n`.
    pub fn count(g: &DirectedGraph) -> usize {
        2 * g.num_edges() + 2 * g.n()
    }

    /// Flat layout `[rho, sigma, b_d, b_r]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.rho.len() + 2 * self.b_d.len());
        v.extend_from_slice(self.rho.as_slice());
        v.extend_from_slice(self.sigma.as_slice());
        v.extend_from_slice(&self.b_d);
        v.extend_from_slice(&self.b_r);
        v
    }

    pub fn from_flat(flat: &[f64], g: &DirectedGraph) -> Result<Self> {
        check_len("flat RD parameters", Self::count(g), flat.len())?;
        let (e, n) = (g.num_edges(), g.n());
        let p = Self {
            rho: EdgeWeights::new(flat[..e].to_vec(), g)?,
            sigma: EdgeWeights::new(flat[e..2 * e].to_vec(), g)?,
            b_d: flat[2 * e..2 * e + n].to_vec(),
            b_r: flat[2 * e + n..].to_vec(),
        };
        p.validate(g)?;
        Ok(p)
    }
}

/// One-step prediction `x + (L^d x + b^d) + tanh(L^r x + b^r)`.
pub fn rd_forward(p: &RdParams, g: &DirectedGraph, x: &[f64]) -> Result<Vec<f64>> {
    RdModel::new(g.clone(), p.clone())?.forward(x)
}

/// RD parameters bound to their diffusion graph, with the reaction graph cached.
#[derive(Debug, Clone, PartialEq)]
pub struct RdModel {
    graph: DirectedGraph,
    reaction: DirectedGraph,
    params: RdParams,
}

/// Per-vertex intermediates of one masked forward pass.
struct Trace {
    pred: Vec<f64>,
    /// `tanh` of the reaction pre-activation.
    react: Vec<f64>,
}

impl RdModel {
    pub fn new(graph: DirectedGraph, params: RdParams) -> Result<Self> {
        params.validate(&graph)?;
        let reaction = graph.reaction_graph();
        Ok(Self {
            graph,
            reaction,
            params,
        })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn reaction_graph(&self) -> &DirectedGraph {
        &self.reaction
    }

    pub fn rd_params(&self) -> &RdParams {
        &self.params
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = &self.params;
        let diff = apply_weighted_laplacian(&self.graph, &p.rho, x)?;
        let react = apply_weighted_laplacian(&self.reaction, &p.sigma, x)?;
        Ok((0..x.len())
            .map(|i| x[i] + (diff[i] + p.b_d[i]) + (react[i] + p.b_r[i]).tanh())
            .collect())
    }

    /// Forward pass where edges touching an unobserved input contribute nothing.
    fn trace(&self, x: &[f64], observed: &[bool]) -> Trace {
        let n = self.graph.n();
        let p = &self.params;
        let (rho, sigma) = (p.rho.as_slice(), p.sigma.as_slice());
        let mut diff = p.b_d.clone();
        let mut react = p.b_r.clone();
        for (e, &(a, b)) in self.graph.edges().iter().enumerate() {
            if observed[a] && observed[b] {
                diff[a] += rho[e] * (x[b] - x[a]);
                react[b] += sigma[e] * (x[a] - x[b]);
            }
        }
        let react: Vec<f64> = react.into_iter().map(f64::tanh).collect();
        let pred = (0..n).map(|i| x[i] + diff[i] + react[i]).collect();
        Trace { pred, react }
    }

    fn check_pair(&self, s: &Pair) -> Result<()> {
        let n = self.graph.n();
        check_len("pair input", n, s.input.len())?;
        check_len("pair input mask", n, s.input_mask.len())?;
        check_len("pair target", n, s.target.len())?;
        check_len("pair target mask", n, s.target_mask.len())
    }

    fn included(&self, batch: &[Pair]) -> Result<usize> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut count = 0;
        for s in batch {
            self.check_pair(s)?;
            count += s.usable_count();
        }
        if count == 0 {
            return Err(Error::AllMasked);
        }
        Ok(count)
    }

    /// Masked-mean loss and its gradient, shaped like [`RdParams`].
    pub fn loss_and_grad_params(&self, batch: &[Pair], kind: LossKind) -> Result<(f64, RdParams)> {
        let count = self.included(batch)? as f64;
        let g = &self.graph;
        let mut grad = RdParams::zeros(g);
        let mut loss = 0.0;
        let mut upstream = vec![0.0; g.n()];
        let mut react_up = vec![0.0; g.n()];
        for s in batch {
            let tr = self.trace(&s.input, &s.input_mask);
            for i in 0..g.n() {
                upstream[i] = 0.0;
                if s.usable(i) {
                    let r = tr.pred[i] - s.target[i];
                    loss += kind.value(r);
                    upstream[i] = kind.derivative(r) / count;
                }
                react_up[i] = upstream[i] * (1.0 - tr.react[i] * tr.react[i]);
                grad.b_d[i] += upstream[i];
                grad.b_r[i] += react_up[i];
            }
            let x = &s.input;
            let (grho, gsigma) = (grad.rho.as_mut_slice(), grad.sigma.as_mut_slice());
            for (e, &(a, b)) in g.edges().iter().enumerate() {
                if s.input_mask[a] && s.input_mask[b] {
                    grho[e] += upstream[a] * (x[b] - x[a]);
                    gsigma[e] += react_up[b] * (x[a] - x[b]);
                }
            }
        }
        Ok((loss / count, grad))
    }

    /// `x_i(t+1) - prediction_i` for every (t, i) where both values were observed.
    pub fn residuals(&self, series: &TimeSeriesTable) -> Result<Vec<Vec<Option<f64>>>> {
        if series.len() < 2 {
            return Err(Error::SeriesTooShort {
                needed: 2,
                got: series.len(),
            });
        }
        check_len("series vertices", self.graph.n(), series.n())?;
        Ok((0..series.len() - 1)
            .map(|t| {
                let pair = series.pair(t);
                let tr = self.trace(&pair.input, &pair.input_mask);
                (0..self.graph.n())
                    .map(|i| pair.usable(i).then(|| pair.target[i] - tr.pred[i]))
                    .collect()
            })
            .collect())
    }

    /// Masked predictions for a pair, `None` where the pair is not scored.
    pub fn predict_pair(&self, pair: &Pair) -> Result<Vec<Option<f64>>> {
        self.check_pair(pair)?;
        let tr = self.trace(&pair.input, &pair.input_mask);
        Ok((0..self.graph.n())
            .map(|i| pair.usable(i).then_some(tr.pred[i]))
            .collect())
    }
}

impl Forecaster for RdModel {
    type Sample = Pair;

    fn num_params(&self) -> usize {
        RdParams::count(&self.graph)
    }

    fn params(&self) -> Vec<f64> {
        self.params.to_flat()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.params = RdParams::from_flat(params, &self.graph)?;
        Ok(())
    }

    fn loss(&self, samples: &[Pair], kind: LossKind) -> Result<f64> {
        let count = self.included(samples)? as f64;
        let mut total = 0.0;
        for s in samples {
            let tr = self.trace(&s.input, &s.input_mask);
            for i in 0..self.graph.n() {
                if s.usable(i) {
                    total += kind.value(tr.pred[i] - s.target[i]);
                }
            }
        }
        Ok(total / count)
    }

    fn loss_and_grad(&self, samples: &[Pair], kind: LossKind) -> Result<(f64, Vec<f64>)> {
        let (loss, grad) = self.loss_and_grad_params(samples, kind)?;
        Ok((loss, grad.to_flat()))
    }
}

/// See [`RdModel::loss_and_grad_params`].
pub fn rd_loss_and_grad(
    p: &RdParams,
    g: &DirectedGraph,
    batch: &[Pair],
    kind: LossKind,
) -> Result<(f64, RdParams)> {
    RdModel::new(g.clone(), p.clone())?.loss_and_grad_params(batch, kind)
}

/// See [`RdModel::residuals`].
pub fn rd_residuals(p: &RdParams, g: &DirectedGraph, series: &TimeSeriesTable) -> Result<Vec<Vec<Option<f64>>>> {
    RdModel::new(g.clone(), p.clone())?.residuals(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Timestamps;

    fn graph(n: usize, edges: &[(usize, usize)]) -> DirectedGraph {
        DirectedGraph::new(n, edges.to_vec()).unwrap()
    }

    #[test]
    fn isolated_vertex_bias_only() {
        let g = graph(1, &[]);
        let p = RdParams {
            b_d: vec![0.3],
            ..RdParams::zeros(&g)
        };
        assert_eq!(rd_forward(&p, &g, &[5.0]).unwrap(), vec![5.3]);
    }

    #[test]
    fn zero_params_is_identity() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let x = [1.5, -2.0, 40.0];
        assert_eq!(rd_forward(&RdParams::zeros(&g), &g, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn single_edge_hand_values() {
        let g = graph(2, &[(0, 1)]);
        let p = RdParams {
            rho: EdgeWeights::new(vec![0.5], &g).unwrap(),
            sigma: EdgeWeights::new(vec![0.2], &g).unwrap(),
            ..RdParams::zeros(&g)
        };
        let out = rd_forward(&p, &g, &[10.0, 20.0]).unwrap();
        assert_eq!(out[0], 15.0);
        // tanh(-2) from its exponential definition.
        let e = (-4.0f64).exp();
        let tanh_m2 = (e - 1.0) / (e + 1.0);
        assert!((out[1] - (20.0 + tanh_m2)).abs() < 1e-14);
    }

    #[test]
    fn stationary_identity_fit_has_zero_grad() {
        let g = graph(3, &[(0, 1), (2, 1)]);
        let m = RdModel::new(g.clone(), RdParams::zeros(&g)).unwrap();
        let batch: Vec<_> = (0..3)
            .map(|k| Pair::fully_observed(k, vec![k as f64, 2.0, -1.0], vec![k as f64, 2.0, -1.0]))
            .collect();
        let (loss, grad) = m.loss_and_grad(&batch, LossKind::Mse).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_errors() {
        let g = graph(2, &[(0, 1)]);
        let m = RdModel::new(g.clone(), RdParams::zeros(&g)).unwrap();
        assert!(matches!(m.loss_and_grad(&[], LossKind::Mse), Err(Error::EmptyBatch)));
        let mut p = Pair::fully_observed(0, vec![1.0, 2.0], vec![1.0, 2.0]);
        p.target_mask = vec![false, false];
        assert!(matches!(m.loss_and_grad(&[p], LossKind::Mae), Err(Error::AllMasked)));
        let short = Pair::fully_observed(0, vec![1.0], vec![1.0]);
        assert!(matches!(m.loss(&[short], LossKind::Mae), Err(Error::Dimension { .. })));
    }

    #[test]
    fn masked_neighbor_contributes_nothing() {
        let g = graph(2, &[(0, 1)]);
        let p = RdParams {
            rho: EdgeWeights::new(vec![0.5], &g).unwrap(),
            ..RdParams::zeros(&g)
        };
        let m = RdModel::new(g, p).unwrap();
        let mut pair = Pair::fully_observed(0, vec![10.0, 20.0], vec![10.0, 20.0]);
        pair.input_mask[1] = false;
        assert_eq!(m.predict_pair(&pair).unwrap(), vec![Some(10.0), None]);
    }

    #[test]
    fn residuals_of_generating_model() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let p = RdParams::init_random(&g, 3);
        let mut rows = vec![vec![50.0, 48.0, 55.0]];
        for _ in 0..5 {
            let next = rd_forward(&p, &g, rows.last().unwrap()).unwrap();
            rows.push(next);
        }
        let ts = Timestamps::Epoch((0..6).map(|k| k * 300).collect());
        let table = TimeSeriesTable::fully_observed(ts.clone(), rows.clone()).unwrap();
        let res = rd_residuals(&p, &g, &table).unwrap();
        assert!(res.iter().flatten().all(|r| r.unwrap() == 0.0));

        // A series whose every step is the model output plus c.
        let c = 0.75;
        let mut shifted = vec![rows[0].clone()];
        for _ in 0..5 {
            let next = rd_forward(&p, &g, shifted.last().unwrap()).unwrap();
            shifted.push(next.iter().map(|v| v + c).collect());
        }
        let table = TimeSeriesTable::fully_observed(ts, shifted).unwrap();
        let res = rd_residuals(&p, &g, &table).unwrap();
        assert!(res.iter().flatten().all(|r| (r.unwrap() - c).abs() < 1e-12));

        let short = TimeSeriesTable::fully_observed(Timestamps::Epoch(vec![0]), vec![vec![1.0; 3]]).unwrap();
        assert!(matches!(
            rd_residuals(&p, &g, &short),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn flat_round_trip_and_count() {
        let g = graph(4, &[(0, 1), (1, 2), (3, 2)]);
        let p = RdParams::init_random(&g, 11);
        assert_eq!(RdParams::count(&g), 2 * 3 + 2 * 4);
        assert_eq!(RdParams::from_flat(&p.to_flat(), &g).unwrap(), p);
        assert!(RdParams::from_flat(&[0.0; 3], &g).is_err());
    }
}
