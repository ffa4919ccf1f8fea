//! SIR-network forecaster for epidemic counts on a travel graph.
//!
//! Residents of vertex `i` spend fraction `phi_(i,j)` of their time at
//! neighbor `j` and the rest (`phi_ii`) at home. The force of infection at a
//! destination `j` is `beta_j * J_j / Np_j` with `J_j = sum_k phi_(k,j) I_k`
//! infectious visitors and `Np_j = sum_k phi_(k,j) N_k` visitors in total.
//! One Euler step gives `I(t+1) = I + (K - gamma) I`, with
//!
//! ```text
//! K_(i,k) = S_i * sum_j beta_j phi_(i,j) phi_(k,j) / Np_j
//! ```
//!
//! Travel fractions squash each out-edge logit with a sigmoid and normalize
//! the row together with a fixed self logit of 1, so every row of `phi` sums
//! to one and the self fraction carries no parameter. `beta` and `gamma` are
//! logistic squashes of raw logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Pair;
use crate::error::{check_len, Error, Result};
use crate::graph::DirectedGraph;
use crate::loss::{Forecaster, LossKind};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fixed, untrained logit of the stay-at-home fraction.
pub const SELF_LOGIT: f64 = 1.0;

/// Unconstrained trainable SIR parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    /// One travel logit per edge.
    pub phi_raw: Vec<f64>,
    /// One infection logit per vertex, or a single shared one.
    pub beta_raw: Vec<f64>,
    pub gamma_raw: f64,
    pub single_beta: bool,
}

impl SirParams {
    pub fn count(g: &DirectedGraph, single_beta: bool) -> usize {
        g.num_edges() + if single_beta { 1 } else { g.n() } + 1
    }

    /// Travel logits near -2 (about 12% of residents away per edge), infection
    /// and recovery probabilities 0.5.
    pub fn init(g: &DirectedGraph, single_beta: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            phi_raw: (0..g.num_edges()).map(|_| -2.0 + rng.random_range(-0.1..0.1)).collect(),
            beta_raw: vec![0.0; if single_beta { 1 } else { g.n() }],
            gamma_raw: 0.0,
            single_beta,
        }
    }

    /// Raw parameters that materialize to the given probabilities.
    pub fn from_probabilities(g: &DirectedGraph, phi_edge: &[f64], beta: &[f64], gamma: f64) -> Result<Self> {
        check_len("edge travel fractions", g.num_edges(), phi_edge.len())?;
        let single_beta = beta.len() == 1 && g.n() > 1;
        if !single_beta {
            check_len("beta", g.n(), beta.len())?;
        }
        let mut phi_self = vec![1.0; g.n()];
        for (e, &(i, _)) in g.edges().iter().enumerate() {
            phi_self[i] -= phi_edge[e];
        }
        if phi_self.iter().any(|&s| s <= 0.0) || phi_edge.iter().any(|&f| f <= 0.0) {
            return Err(Error::InvalidParams(
                "travel fractions must be positive and leave a positive home fraction".into(),
            ));
        }
        // Edge weight sigma(z_e) = sigma(SELF_LOGIT) * phi_e / phi_ii must stay below 1.
        let home = sigmoid(SELF_LOGIT);
        let weights: Vec<f64> = g
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(i, _))| home * phi_edge[e] / phi_self[i])
            .collect();
        if weights.iter().any(|&w| w >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "travel fractions need phi_(i,j) < phi_ii / {home:.4}"
            )));
        }
        let in_unit = |p: f64| p > 0.0 && p < 1.0;
        if !beta.iter().copied().all(in_unit) || !in_unit(gamma) {
            return Err(Error::InvalidParams("beta and gamma must lie in (0,1)".into()));
        }
        Ok(Self {
            phi_raw: weights.into_iter().map(logit).collect(),
            beta_raw: beta.iter().map(|&b| logit(b)).collect(),
            gamma_raw: logit(gamma),
            single_beta,
        })
    }

    pub fn validate(&self, g: &DirectedGraph) -> Result<()> {
        check_len("phi_raw", g.num_edges(), self.phi_raw.len())?;
        check_len("beta_raw", if self.single_beta { 1 } else { g.n() }, self.beta_raw.len())?;
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite SIR parameter".into()));
        }
        Ok(())
    }

    /// Flat layout `[phi_raw, beta_raw, gamma_raw]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.phi_raw.clone();
        v.extend_from_slice(&self.beta_raw);
        v.push(self.gamma_raw);
        v
    }

    pub fn from_flat(flat: &[f64], g: &DirectedGraph, single_beta: bool) -> Result<Self> {
        check_len("flat SIR parameters", Self::count(g, single_beta), flat.len())?;
        let e = g.num_edges();
        let p = Self {
            phi_raw: flat[..e].to_vec(),
            beta_raw: flat[e..flat.len() - 1].to_vec(),
            gamma_raw: flat[flat.len() - 1],
            single_beta,
        };
        p.validate(g)?;
        Ok(p)
    }
}

/// Constrained parameters: row-stochastic travel fractions, rates in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirRates {
    pub phi_self: Vec<f64>,
    pub phi_edge: Vec<f64>,
    /// Per-vertex infection rate (expanded when shared).
    pub beta: Vec<f64>,
    pub gamma: f64,
}

impl SirRates {
    /// `phi_ii + sum_j phi_(i,j)` for every vertex.
    pub fn row_sums(&self, g: &DirectedGraph) -> Vec<f64> {
        (0..g.n())
            .map(|i| self.phi_self[i] + g.out_edges(i).iter().map(|&e| self.phi_edge[e]).sum::<f64>())
            .collect()
    }

    /// Dense travel matrix with the self fractions on the diagonal.
    pub fn phi_dense(&self, g: &DirectedGraph) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; g.n()]; g.n()];
        for i in 0..g.n() {
            m[i][i] = self.phi_self[i];
        }
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            m[i][j] = self.phi_edge[e];
        }
        m
    }
}

pub fn materialize_constraints(p: &SirParams, g: &DirectedGraph) -> Result<SirRates> {
    p.validate(g)?;
    let mut phi_self = vec![0.0; g.n()];
    let mut phi_edge = vec![0.0; g.num_edges()];
    let home = sigmoid(SELF_LOGIT);
    for i in 0..g.n() {
        let out = g.out_edges(i);
        let total = home + out.iter().map(|&e| sigmoid(p.phi_raw[e])).sum::<f64>();
        phi_self[i] = home / total;
        for &e in out {
            phi_edge[e] = sigmoid(p.phi_raw[e]) / total;
        }
    }
    let beta = if p.single_beta {
        vec![sigmoid(p.beta_raw[0]); g.n()]
    } else {
        p.beta_raw.iter().map(|&b| sigmoid(b)).collect()
    };
    Ok(SirRates {
        phi_self,
        phi_edge,
        beta,
        gamma: sigmoid(p.gamma_raw),
    })
}

/// Epidemic bookkeeping at time `t` within the period that started at `t0`.
///
/// Recovered counts follow the discrete accumulation
/// `R_i(t) = R_i(t0) + gamma * sum_{s=t0}^{t-1} I_i(s)`, which keeps
/// `S + I + R = N` consistent with the Euler update of the compartments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirState {
    pub population: Vec<f64>,
    /// `R(t0)`: residents already immune when the period starts.
    pub recovered_offset: Vec<f64>,
    pub t0: usize,
    pub t: usize,
    /// `sum_{s=t0}^{t-1} I(s)`.
    pub cumulative_infectious: Vec<f64>,
}

impl SirState {
    pub fn from_history(population: Vec<f64>, recovered_offset: Vec<f64>, t0: usize, history: &[Vec<f64>]) -> Self {
        let mut cum = vec![0.0; population.len()];
        for row in history {
            for (c, v) in cum.iter_mut().zip(row) {
                *c += v;
            }
        }
        Self {
            population,
            recovered_offset,
            t0,
            t: t0 + history.len(),
            cumulative_infectious: cum,
        }
    }

    /// State at the start of a period in which a fraction `susceptible` of each
    /// population can still be infected.
    pub fn at_period_start(population: Vec<f64>, infectious: &[f64], susceptible: f64, t0: usize) -> Self {
        let recovered_offset = population
            .iter()
            .zip(infectious)
            .map(|(&n, &i)| (n * (1.0 - susceptible) - i).max(0.0))
            .collect();
        let n = population.len();
        Self {
            population,
            recovered_offset,
            t0,
            t: t0,
            cumulative_infectious: vec![0.0; n],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        check_len("population", n, self.population.len())?;
        check_len("recovered offset", n, self.recovered_offset.len())?;
        check_len("cumulative infectious", n, self.cumulative_infectious.len())?;
        if self.population.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParams("populations must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn recovered(&self, gamma: f64) -> Vec<f64> {
        self.recovered_offset
            .iter()
            .zip(&self.cumulative_infectious)
            .map(|(r0, c)| r0 + gamma * c)
            .collect()
    }

    /// `S_i = N_i - I_i - R_i` clamped at zero, and whether each vertex clamped.
    pub fn susceptible(&self, gamma: f64, infectious: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let r = self.recovered(gamma);
        let raw: Vec<f64> = (0..self.population.len())
            .map(|i| self.population[i] - infectious[i] - r[i])
            .collect();
        let clamped = raw.iter().map(|&s| s < 0.0).collect();
        (raw.into_iter().map(|s| s.max(0.0)).collect(), clamped)
    }
}

/// A one-step SIR example: the pair plus the epidemic state at the input time.
#[derive(Debug, Clone, PartialEq)]
pub struct SirSample {
    pub state: SirState,
    pub pair: Pair,
}

/// Output of one prediction step.
#[derive(Debug, Clone, PartialEq)]
pub struct SirStep {
    pub prediction: Vec<f64>,
    /// Vertices whose susceptible count was clamped at zero.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirModel {
    graph: DirectedGraph,
    in_edges: Vec<Vec<usize>>,
    params: SirParams,
}

/// Intermediates of one forward pass, reused by the backward pass.
struct Trace {
    rates: SirRates,
    infectious: Vec<f64>,
    susceptible: Vec<f64>,
    clamped: Vec<bool>,
    visitors_inf: Vec<f64>,
    visitors: Vec<f64>,
    force: Vec<f64>,
    exposure: Vec<f64>,
    pred: Vec<f64>,
}

impl SirModel {
    pub fn new(graph: DirectedGraph, params: SirParams) -> Result<Self> {
        params.validate(&graph)?;
        let mut in_edges = vec![Vec::new(); graph.n()];
        for (e, &(_, j)) in graph.edges().iter().enumerate() {
            in_edges[j].push(e);
        }
        Ok(Self {
            graph,
            in_edges,
            params,
        })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn sir_params(&self) -> &SirParams {
        &self.params
    }

    pub fn rates(&self) -> SirRates {
        materialize_constraints(&self.params, &self.graph).expect("validated on construction")
    }

    /// `N^p_j = sum_k phi_(k,j) N_k`.
    fn travelling_population(&self, rates: &SirRates, population: &[f64]) -> Result<Vec<f64>> {
        (0..self.graph.n())
            .map(|j| {
                let np = rates.phi_self[j] * population[j]
                    + self.in_edges[j]
                        .iter()
                        .map(|&e| rates.phi_edge[e] * population[self.graph.edges()[e].0])
                        .sum::<f64>();
                if np > 0.0 && np.is_finite() {
                    Ok(np)
                } else {
                    Err(Error::DegeneratePopulation { vertex: j })
                }
            })
            .collect()
    }

    fn trace(&self, state: &SirState, infectious: &[f64], observed: &[bool]) -> Result<Trace> {
        let n = self.graph.n();
        state.check(n)?;
        check_len("infectious counts", n, infectious.len())?;
        check_len("observation mask", n, observed.len())?;
        let rates = self.rates();
        let edges = self.graph.edges();
        let infectious: Vec<f64> = (0..n).map(|i| if observed[i] { infectious[i] } else { 0.0 }).collect();
        let (susceptible, clamped) = state.susceptible(rates.gamma, &infectious);
        let visitors = self.travelling_population(&rates, &state.population)?;
        let visitors_inf: Vec<f64> = (0..n)
            .map(|j| {
                rates.phi_self[j] * infectious[j]
                    + self.in_edges[j]
                        .iter()
                        .map(|&e| rates.phi_edge[e] * infectious[edges[e].0])
                        .sum::<f64>()
            })
            .collect();
        let force: Vec<f64> = (0..n).map(|j| rates.beta[j] * visitors_inf[j] / visitors[j]).collect();
        let exposure: Vec<f64> = (0..n)
            .map(|i| {
                rates.phi_self[i] * force[i]
                    + self
                        .graph
                        .out_edges(i)
                        .iter()
                        .map(|&e| rates.phi_edge[e] * force[edges[e].1])
                        .sum::<f64>()
            })
            .collect();
        let pred = (0..n)
            .map(|i| infectious[i] + susceptible[i] * exposure[i] - rates.gamma * infectious[i])
            .collect();
        Ok(Trace {
            rates,
            infectious,
            susceptible,
            clamped,
            visitors_inf,
            visitors,
            force,
            exposure,
            pred,
        })
    }

    /// `I(t+1) = I + (K - gamma) I` with `S` taken from `state`.
    pub fn forward(&self, state: &SirState, infectious: &[f64]) -> Result<SirStep> {
        if infectious.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParams("infectious counts must be nonnegative".into()));
        }
        let tr = self.trace(state, infectious, &vec![true; infectious.len()])?;
        Ok(SirStep {
            clamped: tr.clamped.iter().filter(|&&c| c).count(),
            prediction: tr.pred,
        })
    }

    /// The dense transformation matrix `K` at the state's time.
    pub fn build_k(&self, state: &SirState, infectious: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.graph.n();
        state.check(n)?;
        check_len("infectious counts", n, infectious.len())?;
        let rates = self.rates();
        let (susceptible, _) = state.susceptible(rates.gamma, infectious);
        let visitors = self.travelling_population(&rates, &state.population)?;
        let edges = self.graph.edges();
        // (destination, fraction) lists: who from row i goes where, who arrives at j.
        let dests = |i: usize| {
            std::iter::once((i, rates.phi_self[i]))
                .chain(self.graph.out_edges(i).iter().map(|&e| (edges[e].1, rates.phi_edge[e])))
        };
        let mut k = vec![vec![0.0; n]; n];
        for (i, row) in k.iter_mut().enumerate() {
            for (j, phi_ij) in dests(i) {
                let w = rates.beta[j] * phi_ij * susceptible[i] / visitors[j];
                row[j] += w * rates.phi_self[j];
                for &e in &self.in_edges[j] {
                    row[edges[e].0] += w * rates.phi_edge[e];
                }
            }
        }
        Ok(k)
    }

    /// Continuous right-hand sides `(dS/dt, dI/dt, dR/dt)` at the state.
    pub fn rhs(&self, state: &SirState, infectious: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let tr = self.trace(state, infectious, &vec![true; infectious.len()])?;
        let n = self.graph.n();
        let new_inf: Vec<f64> = (0..n).map(|i| tr.susceptible[i] * tr.exposure[i]).collect();
        let recov: Vec<f64> = (0..n).map(|i| tr.rates.gamma * tr.infectious[i]).collect();
        Ok((
            new_inf.iter().map(|v| -v).collect(),
            (0..n).map(|i| new_inf[i] - recov[i]).collect(),
            recov,
        ))
    }

    fn included(&self, batch: &[SirSample]) -> Result<usize> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = self.graph.n();
        let mut count = 0;
        for s in batch {
            check_len("pair target", n, s.pair.target.len())?;
            check_len("pair target mask", n, s.pair.target_mask.len())?;
            check_len("pair input mask", n, s.pair.input_mask.len())?;
            count += s.pair.usable_count();
        }
        if count == 0 {
            return Err(Error::AllMasked);
        }
        Ok(count)
    }

    /// Masked-mean loss and gradient with respect to the raw parameters.
    pub fn loss_and_grad_params(&self, batch: &[SirSample], kind: LossKind) -> Result<(f64, SirParams)> {
        let count = self.included(batch)? as f64;
        let g = &self.graph;
        let n = g.n();
        let edges = g.edges();
        let mut g_phi_self = vec![0.0; n];
        let mut g_phi_edge = vec![0.0; g.num_edges()];
        let mut g_beta = vec![0.0; n];
        let mut g_gamma = 0.0;
        let mut loss = 0.0;
        let mut rates = None;
        for s in batch {
            let tr = self.trace(&s.state, &s.pair.input, &s.pair.input_mask)?;
            let upstream: Vec<f64> = (0..n)
                .map(|i| {
                    if s.pair.usable(i) {
                        let r = tr.pred[i] - s.pair.target[i];
                        loss += kind.value(r);
                        kind.derivative(r) / count
                    } else {
                        0.0
                    }
                })
                .collect();
            let r = &tr.rates;
            for i in 0..n {
                g_gamma -= upstream[i] * tr.infectious[i];
                if !tr.clamped[i] {
                    // dS_i/dgamma = -sum of past infectious counts.
                    g_gamma -= upstream[i] * tr.exposure[i] * s.state.cumulative_infectious[i];
                }
            }
            let g_exposure: Vec<f64> = (0..n).map(|i| upstream[i] * tr.susceptible[i]).collect();
            let mut g_force: Vec<f64> = (0..n).map(|j| g_exposure[j] * r.phi_self[j]).collect();
            for (e, &(i, j)) in edges.iter().enumerate() {
                g_force[j] += g_exposure[i] * r.phi_edge[e];
                g_phi_edge[e] += g_exposure[i] * tr.force[j];
            }
            let mut g_vis_inf = vec![0.0; n];
            let mut g_vis = vec![0.0; n];
            for j in 0..n {
                g_beta[j] += g_force[j] * tr.visitors_inf[j] / tr.visitors[j];
                g_vis_inf[j] = g_force[j] * r.beta[j] / tr.visitors[j];
                g_vis[j] = -g_force[j] * tr.force[j] / tr.visitors[j];
                g_phi_self[j] += g_exposure[j] * tr.force[j]
                    + g_vis_inf[j] * tr.infectious[j]
                    + g_vis[j] * s.state.population[j];
            }
            for (e, &(k, j)) in edges.iter().enumerate() {
                g_phi_edge[e] += g_vis_inf[j] * tr.infectious[k] + g_vis[j] * s.state.population[k];
            }
            rates = Some(tr.rates);
        }
        let r = rates.expect("batch is nonempty");

        // Normalized rows: d raw_e = phi_e (1 - sigmoid(raw_e)) (g_e - sum_row phi * g).
        let mut phi_raw = vec![0.0; g.num_edges()];
        for i in 0..n {
            let out = g.out_edges(i);
            let mean = r.phi_self[i] * g_phi_self[i] + out.iter().map(|&e| r.phi_edge[e] * g_phi_edge[e]).sum::<f64>();
            for &e in out {
                let squash = sigmoid(self.params.phi_raw[e]);
                phi_raw[e] = r.phi_edge[e] * (1.0 - squash) * (g_phi_edge[e] - mean);
            }
        }
        let beta_raw = if self.params.single_beta {
            vec![(0..n).map(|j| g_beta[j] * r.beta[j] * (1.0 - r.beta[j])).sum()]
        } else {
            (0..n).map(|j| g_beta[j] * r.beta[j] * (1.0 - r.beta[j])).collect()
        };
        Ok((
            loss / count,
            SirParams {
                phi_raw,
                beta_raw,
                gamma_raw: g_gamma * r.gamma * (1.0 - r.gamma),
                single_beta: self.params.single_beta,
            },
        ))
    }

    /// Masked predictions for a sample, `None` where it is not scored.
    pub fn predict_sample(&self, s: &SirSample) -> Result<Vec<Option<f64>>> {
        let tr = self.trace(&s.state, &s.pair.input, &s.pair.input_mask)?;
        Ok((0..self.graph.n())
            .map(|i| s.pair.usable(i).then_some(tr.pred[i]))
            .collect())
    }
}

impl Forecaster for SirModel {
    type Sample = SirSample;

    fn num_params(&self) -> usize {
        SirParams::count(&self.graph, self.params.single_beta)
    }

    fn params(&self) -> Vec<f64> {
        self.params.to_flat()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.params = SirParams::from_flat(params, &self.graph, self.params.single_beta)?;
        Ok(())
    }

    fn loss(&self, samples: &[SirSample], kind: LossKind) -> Result<f64> {
        let count = self.included(samples)? as f64;
        let mut total = 0.0;
        for s in samples {
            let tr = self.trace(&s.state, &s.pair.input, &s.pair.input_mask)?;
            for i in 0..self.graph.n() {
                if s.pair.usable(i) {
                    total += kind.value(tr.pred[i] - s.pair.target[i]);
                }
            }
        }
        Ok(total / count)
    }

    fn loss_and_grad(&self, samples: &[SirSample], kind: LossKind) -> Result<(f64, Vec<f64>)> {
        let (loss, grad) = self.loss_and_grad_params(samples, kind)?;
        Ok((loss, grad.to_flat()))
    }
}

/// See [`SirModel::build_k`].
pub fn build_k(p: &SirParams, g: &DirectedGraph, state: &SirState, infectious: &[f64]) -> Result<Vec<Vec<f64>>> {
    SirModel::new(g.clone(), p.clone())?.build_k(state, infectious)
}

/// See [`SirModel::forward`].
pub fn sir_forward(p: &SirParams, g: &DirectedGraph, state: &SirState, infectious: &[f64]) -> Result<SirStep> {
    SirModel::new(g.clone(), p.clone())?.forward(state, infectious)
}

/// See [`SirModel::loss_and_grad_params`].
pub fn sir_loss_and_grad(
    p: &SirParams,
    g: &DirectedGraph,
    episodes: &[SirSample],
    kind: LossKind,
) -> Result<(f64, SirParams)> {
    SirModel::new(g.clone(), p.clone())?.loss_and_grad_params(episodes, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> DirectedGraph {
        DirectedGraph::new(n, edges.to_vec()).unwrap()
    }

    fn fresh_state(pop: &[f64]) -> SirState {
        SirState::from_history(pop.to_vec(), vec![0.0; pop.len()], 0, &[])
    }

    #[test]
    fn isolated_vertex_keeps_everyone_home() {
        let g = graph(2, &[(0, 1)]);
        let p = SirParams::init(&g, false, 1);
        let r = materialize_constraints(&p, &g).unwrap();
        assert_eq!(r.phi_self[1], 1.0);
    }

    #[test]
    fn logit_matching_home_splits_evenly() {
        let g = graph(2, &[(0, 1)]);
        let p = SirParams {
            phi_raw: vec![SELF_LOGIT],
            beta_raw: vec![0.0, 0.0],
            gamma_raw: 0.0,
            single_beta: false,
        };
        let r = materialize_constraints(&p, &g).unwrap();
        assert_eq!(r.phi_self[0], 0.5);
        assert_eq!(r.phi_edge[0], 0.5);
        assert_eq!(r.gamma, 0.5);
    }

    #[test]
    fn rows_sum_to_one_for_extreme_logits() {
        let g = graph(4, &[(0, 1), (0, 2), (0, 3), (2, 1)]);
        let p = SirParams {
            phi_raw: vec![800.0, -800.0, 3.0, 0.1],
            beta_raw: vec![50.0, -50.0, 0.0, 1.0],
            gamma_raw: -700.0,
            single_beta: false,
        };
        let r = materialize_constraints(&p, &g).unwrap();
        for s in r.row_sums(&g) {
            assert!((s - 1.0).abs() <= 1e-12);
        }
        assert!(r.beta.iter().all(|b| (0.0..=1.0).contains(b)));
        assert!((0.0..=1.0).contains(&r.gamma));
    }

    #[test]
    fn scalar_sir_step() {
        let g = graph(1, &[]);
        let (beta, gamma) = (0.3, 0.1);
        let p = SirParams::from_probabilities(&g, &[], &[beta], gamma).unwrap();
        let state = SirState {
            population: vec![1000.0],
            recovered_offset: vec![0.0],
            t0: 0,
            t: 0,
            cumulative_infectious: vec![0.0],
        };
        // S = 1000 - 100 - 0 = 900.
        let k = build_k(&p, &g, &state, &[100.0]).unwrap();
        assert!((k[0][0] - beta * 900.0 / 1000.0).abs() < 1e-12);
        let step = sir_forward(&p, &g, &state, &[100.0]).unwrap();
        let expected = 100.0 + beta * 900.0 * 100.0 / 1000.0 - gamma * 100.0;
        assert!((step.prediction[0] - expected).abs() < 1e-9);
        assert_eq!(sir_forward(&p, &g, &state, &[0.0]).unwrap().prediction, vec![0.0]);
    }

    #[test]
    fn k_is_nonnegative_and_sparse() {
        // 0 -> 1 and 3 isolated: 3 shares no destination with anyone.
        let g = graph(4, &[(0, 1), (2, 1)]);
        let p = SirParams::init(&g, false, 5);
        let state = fresh_state(&[100.0, 200.0, 150.0, 80.0]);
        let k = build_k(&p, &g, &state, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(k.iter().flatten().all(|&v| v >= 0.0));
        for i in 0..3 {
            assert_eq!(k[i][3], 0.0);
            assert_eq!(k[3][i], 0.0);
        }
        assert!(k[0][2] > 0.0, "0 and 2 both travel to 1");
    }

    #[test]
    fn clamps_overshooting_susceptibles() {
        let g = graph(1, &[]);
        let p = SirParams::from_probabilities(&g, &[], &[0.5], 0.5).unwrap();
        let state = SirState {
            population: vec![100.0],
            recovered_offset: vec![0.0],
            t0: 0,
            t: 10,
            cumulative_infectious: vec![500.0],
        };
        let step = sir_forward(&p, &g, &state, &[10.0]).unwrap();
        assert_eq!(step.clamped, 1);
        assert_eq!(step.prediction, vec![5.0]);
    }

    #[test]
    fn degenerate_population_is_an_error() {
        let g = graph(1, &[]);
        let p = SirParams::init(&g, false, 0);
        let state = fresh_state(&[0.0]);
        assert!(sir_forward(&p, &g, &state, &[0.0]).is_err());
        let mut s = fresh_state(&[1.0]);
        s.population[0] = f64::INFINITY;
        assert!(build_k(&p, &g, &s, &[0.0]).is_err());
    }

    #[test]
    fn gamma_gradient_negative_when_overpredicting() {
        // No travel and beta ~ 0 so K vanishes; predictions exceed targets.
        let g = graph(2, &[]);
        let p = SirParams {
            phi_raw: vec![],
            beta_raw: vec![-40.0, -40.0],
            gamma_raw: 0.0,
            single_beta: false,
        };
        let m = SirModel::new(g, p).unwrap();
        let sample = SirSample {
            state: fresh_state(&[100.0, 100.0]),
            pair: Pair::fully_observed(0, vec![10.0, 20.0], vec![1.0, 2.0]),
        };
        let (_, grad) = m.loss_and_grad_params(&[sample], LossKind::Mse).unwrap();
        assert!(grad.gamma_raw < 0.0);
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_grad() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let p = SirParams::init(&g, false, 9);
        let m = SirModel::new(g, p).unwrap();
        let state = fresh_state(&[500.0, 300.0, 400.0]);
        let input = vec![5.0, 1.0, 2.0];
        let target = m.forward(&state, &input).unwrap().prediction;
        let sample = SirSample {
            state,
            pair: Pair::fully_observed(0, input, target),
        };
        let (loss, grad) = m.loss_and_grad(&[sample], LossKind::Mse).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_counts() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(SirParams::count(&g, false), 2 + 3 + 1);
        assert_eq!(SirParams::count(&g, true), 2 + 1 + 1);
        let p = SirParams::init(&g, true, 0);
        assert_eq!(SirParams::from_flat(&p.to_flat(), &g, true).unwrap(), p);
    }

    #[test]
    fn probabilities_round_trip() {
        let g = graph(3, &[(0, 1), (0, 2), (2, 1)]);
        let p = SirParams::from_probabilities(&g, &[0.2, 0.1, 0.3], &[0.4, 0.5, 0.6], 0.25).unwrap();
        let r = materialize_constraints(&p, &g).unwrap();
        assert!((r.phi_edge[0] - 0.2).abs() < 1e-12);
        assert!((r.phi_self[0] - 0.7).abs() < 1e-12);
        assert!((r.beta[2] - 0.6).abs() < 1e-12);
        assert!((r.gamma - 0.25).abs() < 1e-12);
        assert!(SirParams::from_probabilities(&g, &[0.6, 0.5, 0.3], &[0.4; 3], 0.2).is_err());
    }
}
