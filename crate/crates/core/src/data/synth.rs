//! Synthetic generators with known dynamics and injectable pattern terms.
//!
//! RD series follow `x(t+1) = x(t) + F(x(t)) + G(t) + noise`, where `F` is the
//! reaction-diffusion right-hand side with known parameters and `G` is a
//! periodic pattern term `a sin(2 pi t / P + phase_i + shift)` with vertex
//! phases drawn uniformly on `[0, 2 pi)`. SIR episodes are Euler-integrated
//! SIR-network compartments with known travel fractions and rates.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{apply_weighted_laplacian, DirectedGraph, EdgeWeights};
use crate::rdgcn::{RdModel, RdParams};
use crate::sirgcn::{materialize_constraints, SirParams, SirRates};

use super::table::{IsoWeek, TimeSeriesTable, Timestamps, SECONDS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Ring,
    RandomOneDirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    None,
    SymmetricPeriodic,
    ShiftedPeriodic,
}

/// Pattern term shape. Phases come from the truth seed, so two configs
/// sharing it produce aligned patterns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub kind: PatternKind,
    pub amplitude: f64,
    pub period: f64,
    /// Extra phase added by [`PatternKind::ShiftedPeriodic`].
    pub phase_shift: f64,
}

impl Pattern {
    pub fn value(&self, t: usize, phase: f64) -> f64 {
        let shift = match self.kind {
            PatternKind::None => return 0.0,
            PatternKind::SymmetricPeriodic => 0.0,
            PatternKind::ShiftedPeriodic => self.phase_shift,
        };
        self.amplitude * (TAU * t as f64 / self.period + phase + shift).sin()
    }

    pub fn row(&self, t: usize, phases: &[f64]) -> Vec<f64> {
        phases.iter().map(|&ph| self.value(t, ph)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub topology: Topology,
    /// Chords added on top of the ring by the random topology (default `n`).
    pub extra_edges: Option<usize>,
    /// Number of time steps (rows) per series or per SIR episode.
    pub horizon: usize,
    pub g_pattern: PatternKind,
    pub g_amplitude: f64,
    pub g_period: f64,
    pub g_phase_shift: f64,
    /// Standard deviation of i.i.d. Gaussian noise added to each RD step.
    pub noise_sd: f64,
    pub seed: u64,
    /// Seed for the graph and true parameters; defaults to `seed`.
    pub truth_seed: Option<u64>,
    pub step_seconds: i64,
    /// First timestamp (epoch seconds). The default is a Monday midnight.
    pub start_epoch: i64,
    /// Mean speed level and the half-width of per-vertex offsets around it.
    pub level: f64,
    pub level_spread: f64,
    /// Standard deviation of the initial perturbation from equilibrium.
    pub init_spread: f64,
    /// Range of the true diffusion and reaction edge weights before rescaling.
    pub weight_range: (f64, f64),
    /// RD only: every `segment_len` rows the series has one unobserved row and
    /// then restarts from a fresh perturbation. `None` keeps one trajectory.
    pub segment_len: Option<usize>,
    pub episodes: usize,
    pub susceptible_fraction: f64,
    pub population_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub gamma: f64,
    pub initial_infectious: (f64, f64),
    pub start_week: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 20,
            topology: Topology::RandomOneDirectional,
            extra_edges: None,
            horizon: 2000,
            g_pattern: PatternKind::None,
            g_amplitude: 1.0,
            g_period: 24.0,
            g_phase_shift: std::f64::consts::PI,
            noise_sd: 0.0,
            seed: 0,
            truth_seed: None,
            step_seconds: 300,
            start_epoch: 4 * SECONDS_PER_DAY,
            level: 50.0,
            level_spread: 2.0,
            init_spread: 3.0,
            weight_range: (0.05, 0.25),
            segment_len: None,
            episodes: 6,
            susceptible_fraction: 0.5,
            population_range: (5.0e4, 2.0e5),
            beta_range: (0.3, 0.9),
            gamma: 0.2,
            initial_infectious: (1.0, 20.0),
            start_week: "2010-W01".into(),
        }
    }
}

impl SynthConfig {
    pub fn pattern(&self) -> Pattern {
        Pattern {
            kind: self.g_pattern,
            amplitude: self.g_amplitude,
            period: self.g_period,
            phase_shift: self.g_phase_shift,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.horizon < 2 {
            return bad("horizon must be at least 2");
        }
        if !(self.g_period > 0.0) {
            return bad("g_period must be positive");
        }
        if !(self.noise_sd >= 0.0) || !(self.init_spread >= 0.0) {
            return bad("noise_sd and init_spread must be nonnegative");
        }
        if self.segment_len.is_some_and(|l| l < 3) {
            return bad("segment_len must be at least 3");
        }
        if !(self.weight_range.0 > 0.0 && self.weight_range.0 < self.weight_range.1) {
            return bad("weight_range must be positive and increasing");
        }
        if self.step_seconds <= 0 {
            return bad("step_seconds must be positive");
        }
        let unit = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1 && r.1 < 1.0;
        if !unit(self.beta_range) || !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("beta_range and gamma must lie in (0,1)");
        }
        if !(self.susceptible_fraction > 0.0 && self.susceptible_fraction <= 1.0) {
            return bad("susceptible_fraction must lie in (0,1]");
        }
        if !(self.population_range.0 > 0.0 && self.population_range.0 <= self.population_range.1) {
            return bad("population_range must be positive and ordered");
        }
        self.start_week.parse::<IsoWeek>()?;
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn truth_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.truth_seed.unwrap_or(self.seed));
        r.set_stream(stream);
        r
    }

    /// Per-vertex pattern phases, uniform on `[0, 2 pi)`. They belong to the
    /// domain, so they follow `truth_seed`.
    pub fn phases(&self) -> Vec<f64> {
        let mut rng = self.truth_rng(3);
        (0..self.n).map(|_| rng.random_range(0.0..TAU)).collect()
    }
}

const GRAPH_STREAM: u64 = 1;
const TRUTH_STREAM: u64 = 2;
const INIT_STREAM: u64 = 4;
const NOISE_STREAM: u64 = 5;

/// Ring `i -> i+1` (one-directional; no edge for `n <= 1`), optionally with
/// random chords that never create an antiparallel pair.
pub fn build_topology(cfg: &SynthConfig) -> Result<DirectedGraph> {
    let n = cfg.n;
    let mut edges: Vec<(usize, usize)> = match n {
        1 => vec![],
        2 => vec![(0, 1)],
        _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    };
    if cfg.topology == Topology::RandomOneDirectional && n > 3 {
        let mut rng = cfg.truth_rng(GRAPH_STREAM);
        let mut present: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();
        let wanted = cfg.extra_edges.unwrap_or(n);
        let mut attempts = 0;
        let mut added = 0;
        while added < wanted && attempts < 100 * wanted.max(1) {
            attempts += 1;
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b || present.contains(&(a, b)) || present.contains(&(b, a)) {
                continue;
            }
            present.insert((a, b));
            edges.push((a, b));
            added += 1;
        }
    }
    DirectedGraph::new_one_directional(n, edges)
}

/// Gershgorin bound on the spectral radius of the linearized step
/// `I + L^d + L^r` (the tanh slope is at most one).
pub fn linear_step_bound(g: &DirectedGraph, p: &RdParams) -> f64 {
    let n = g.n();
    let mut diag = vec![1.0; n];
    let mut off = vec![0.0; n];
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        let rho = p.rho.as_slice()[e];
        let sigma = p.sigma.as_slice()[e];
        diag[a] -= rho;
        off[a] += rho.abs();
        diag[b] -= sigma;
        off[b] += sigma.abs();
    }
    (0..n).map(|i| diag[i].abs() + off[i]).fold(0.0, f64::max)
}

pub fn check_linear_stability(g: &DirectedGraph, p: &RdParams) -> Result<()> {
    let bound = linear_step_bound(g, p);
    if bound > 1.0 + 1e-9 {
        return Err(Error::UnstableGenerator(format!(
            "Gershgorin bound of the linearized step is {bound:.4} > 1"
        )));
    }
    Ok(())
}

/// True RD parameters with an equilibrium at a random speed profile.
///
/// Edge weights are uniform in `weight_range`, rescaled per vertex so each row
/// of the linearized step keeps a Gershgorin bound of 1. Diffusion biases are
/// then solved so that `F(profile) = 0`.
pub fn sample_rd_truth(g: &DirectedGraph, cfg: &SynthConfig) -> (RdParams, Vec<f64>) {
    let mut rng = cfg.truth_rng(TRUTH_STREAM);
    let n = g.n();
    let profile: Vec<f64> = (0..n)
        .map(|_| cfg.level + rng.random_range(-cfg.level_spread..=cfg.level_spread))
        .collect();
    let (lo, hi) = cfg.weight_range;
    let mut rho: Vec<f64> = (0..g.num_edges()).map(|_| rng.random_range(lo..hi)).collect();
    let mut sigma: Vec<f64> = (0..g.num_edges()).map(|_| rng.random_range(lo..hi)).collect();
    let mut load = vec![0.0; n];
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        load[a] += rho[e];
        load[b] += sigma[e];
    }
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if load[a] > 0.9 {
            rho[e] *= 0.9 / load[a];
        }
        if load[b] > 0.9 {
            sigma[e] *= 0.9 / load[b];
        }
    }
    let b_r: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..0.2)).collect();
    let rho = EdgeWeights::new(rho, g).expect("finite");
    let sigma = EdgeWeights::new(sigma, g).expect("finite");
    let diff = apply_weighted_laplacian(g, &rho, &profile).expect("shapes match");
    let react = apply_weighted_laplacian(&g.reaction_graph(), &sigma, &profile).expect("shapes match");
    let b_d = (0..n).map(|i| -diff[i] - (react[i] + b_r[i]).tanh()).collect();
    (RdParams { rho, sigma, b_d, b_r }, profile)
}

#[derive(Debug, Clone)]
pub struct SynthRd {
    pub graph: DirectedGraph,
    pub params: RdParams,
    /// Equilibrium speeds of the true dynamics.
    pub profile: Vec<f64>,
    pub phases: Vec<f64>,
    pub table: TimeSeriesTable,
    /// Pattern term `G(t)` added on step `t -> t+1`.
    pub pattern: Vec<Vec<f64>>,
    /// Everything added beyond `F` on step `t -> t+1` (pattern plus noise).
    pub injected: Vec<Vec<f64>>,
}

pub fn synth_rd(cfg: &SynthConfig) -> Result<SynthRd> {
    cfg.validate()?;
    let graph = build_topology(cfg)?;
    let (params, profile) = sample_rd_truth(&graph, cfg);
    synth_rd_with(cfg, graph, params, profile)
}

/// Simulates the configured series under explicit true parameters, starting
/// from `profile` plus Gaussian noise of scale `init_spread`.
pub fn synth_rd_with(cfg: &SynthConfig, graph: DirectedGraph, params: RdParams, profile: Vec<f64>) -> Result<SynthRd> {
    cfg.validate()?;
    if graph.n() != cfg.n || profile.len() != cfg.n {
        return Err(Error::Config("graph, profile and n disagree".into()));
    }
    check_linear_stability(&graph, &params)?;
    let model = RdModel::new(graph.clone(), params.clone())?;
    let phases = cfg.phases();
    let pattern_spec = cfg.pattern();
    let mut init_rng = cfg.rng(INIT_STREAM);
    let mut noise_rng = cfg.rng(NOISE_STREAM);
    let init = Normal::new(0.0, cfg.init_spread).map_err(|e| Error::Config(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Config(e.to_string()))?;

    let mut fresh = || -> Vec<f64> { profile.iter().map(|&c| c + init.sample(&mut init_rng)).collect() };
    let is_gap = |r: usize| cfg.segment_len.is_some_and(|l| r > 0 && r % l == 0);
    let mut x = fresh();
    let mut rows = Vec::with_capacity(cfg.horizon);
    let mut mask = vec![vec![true; cfg.n]; cfg.horizon];
    let mut pattern = Vec::with_capacity(cfg.horizon - 1);
    let mut injected = Vec::with_capacity(cfg.horizon - 1);
    rows.push(x.clone());
    for t in 0..cfg.horizon - 1 {
        if is_gap(t + 1) || is_gap(t) {
            if is_gap(t + 1) {
                rows.push(vec![0.0; cfg.n]);
                mask[t + 1] = vec![false; cfg.n];
            } else {
                x = fresh();
                rows.push(x.clone());
            }
            pattern.push(vec![0.0; cfg.n]);
            injected.push(vec![0.0; cfg.n]);
            continue;
        }
        let g_t = pattern_spec.row(t, &phases);
        let extra: Vec<f64> = g_t
            .iter()
            .map(|&gv| if cfg.noise_sd > 0.0 { gv + noise.sample(&mut noise_rng) } else { gv })
            .collect();
        let next = model.forward(&x)?;
        x = next.iter().zip(&extra).map(|(a, b)| a + b).collect();
        let magnitude = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(magnitude < 1e6) {
            return Err(Error::TrajectoryDiverged { step: t + 1, magnitude });
        }
        rows.push(x.clone());
        pattern.push(g_t);
        injected.push(extra);
    }
    let stamps = (0..cfg.horizon as i64).map(|k| cfg.start_epoch + k * cfg.step_seconds).collect();
    let table = TimeSeriesTable::new(Timestamps::Epoch(stamps), rows, mask)?;
    Ok(SynthRd {
        graph,
        params,
        profile,
        phases,
        table,
        pattern,
        injected,
    })
}

/// Compartments of one simulated epidemic period, indexed `[t][vertex]`.
#[derive(Debug, Clone)]
pub struct SirEpisode {
    pub susceptible: Vec<Vec<f64>>,
    pub infectious: Vec<Vec<f64>>,
    pub recovered: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SynthSir {
    pub graph: DirectedGraph,
    pub params: SirParams,
    pub rates: SirRates,
    pub population: Vec<f64>,
    pub episodes: Vec<SirEpisode>,
    /// Infectious counts of every episode back to back, one ISO week per row.
    pub table: TimeSeriesTable,
    /// Rows per episode; episode `k` starts at row `k * period`.
    pub period: usize,
    pub susceptible_fraction: f64,
}

/// One forward-Euler step of the SIR-network compartments using the dense
/// travel matrix. Returns `(S, I, R)` at the next time.
pub fn sir_euler_step(
    phi: &[Vec<f64>],
    beta: &[f64],
    gamma: f64,
    population: &[f64],
    s: &[f64],
    i: &[f64],
    r: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = population.len();
    let visitors: Vec<f64> = (0..n).map(|j| (0..n).map(|k| phi[k][j] * population[k]).sum()).collect();
    let infectious_visitors: Vec<f64> = (0..n).map(|j| (0..n).map(|k| phi[k][j] * i[k]).sum()).collect();
    let mut s2 = vec![0.0; n];
    let mut i2 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    for v in 0..n {
        let new_inf = s[v]
            * (0..n)
                .map(|j| beta[j] * phi[v][j] * infectious_visitors[j] / visitors[j])
                .sum::<f64>();
        let rec = gamma * i[v];
        s2[v] = s[v] - new_inf;
        i2[v] = i[v] + new_inf - rec;
        r2[v] = r[v] + rec;
    }
    (s2, i2, r2)
}

pub fn synth_sir(cfg: &SynthConfig) -> Result<SynthSir> {
    cfg.validate()?;
    let graph = build_topology(cfg)?;
    let n = graph.n();
    let mut truth = cfg.truth_rng(TRUTH_STREAM);
    let mut phi_edge: Vec<f64> = (0..graph.num_edges()).map(|_| truth.random_range(0.02..0.15)).collect();
    for i in 0..n {
        let away: f64 = graph.out_edges(i).iter().map(|&e| phi_edge[e]).sum();
        if away > 0.5 {
            for &e in graph.out_edges(i) {
                phi_edge[e] *= 0.5 / away;
            }
        }
    }
    let beta: Vec<f64> = (0..n)
        .map(|_| truth.random_range(cfg.beta_range.0..=cfg.beta_range.1))
        .collect();
    let params = SirParams::from_probabilities(&graph, &phi_edge, &beta, cfg.gamma)?;
    let rates = materialize_constraints(&params, &graph)?;
    let population: Vec<f64> = (0..n)
        .map(|_| truth.random_range(cfg.population_range.0..=cfg.population_range.1))
        .collect();
    let phi = rates.phi_dense(&graph);

    let mut rng = cfg.rng(INIT_STREAM);
    let mut episodes = Vec::with_capacity(cfg.episodes);
    let mut rows = Vec::with_capacity(cfg.episodes * cfg.horizon);
    for _ in 0..cfg.episodes {
        let i0: Vec<f64> = (0..n)
            .map(|_| rng.random_range(cfg.initial_infectious.0..=cfg.initial_infectious.1))
            .collect();
        let s0: Vec<f64> = population.iter().map(|&p| cfg.susceptible_fraction * p).collect();
        let r0: Vec<f64> = (0..n).map(|v| population[v] - s0[v] - i0[v]).collect();
        if r0.iter().any(|&r| r < 0.0) {
            return Err(Error::Config("initial infectious exceed the non-susceptible population".into()));
        }
        let mut ep = SirEpisode {
            susceptible: vec![s0],
            infectious: vec![i0],
            recovered: vec![r0],
        };
        for _ in 1..cfg.horizon {
            let last = ep.infectious.len() - 1;
            let (s, i, r) = sir_euler_step(
                &phi,
                &rates.beta,
                rates.gamma,
                &population,
                &ep.susceptible[last],
                &ep.infectious[last],
                &ep.recovered[last],
            );
            ep.susceptible.push(s);
            ep.infectious.push(i);
            ep.recovered.push(r);
        }
        rows.extend(ep.infectious.iter().cloned());
        episodes.push(ep);
    }
    let mut week: IsoWeek = cfg.start_week.parse()?;
    let mut weeks = Vec::with_capacity(rows.len());
    for _ in 0..rows.len() {
        weeks.push(week);
        week = week.succ();
    }
    let table = TimeSeriesTable::with_zero_missing(Timestamps::IsoWeek(weeks), rows)?;
    Ok(SynthSir {
        graph,
        params,
        rates,
        population,
        episodes,
        table,
        period: cfg.horizon,
        susceptible_fraction: cfg.susceptible_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdgcn::rd_residuals;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            n: 6,
            horizon: 200,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn random_topology_is_one_directional() {
        for seed in 0..20 {
            let cfg = SynthConfig {
                n: 12,
                seed,
                extra_edges: Some(30),
                ..SynthConfig::default()
            };
            let g = build_topology(&cfg).unwrap();
            g.check_one_directional().unwrap();
            assert!(g.num_edges() > 12);
        }
        let ring = build_topology(&SynthConfig {
            n: 5,
            topology: Topology::Ring,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(ring.num_edges(), 5);
        assert_eq!(build_topology(&SynthConfig { n: 1, ..SynthConfig::default() }).unwrap().num_edges(), 0);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let cfg = small_cfg();
        let g = build_topology(&cfg).unwrap();
        let (p, profile) = sample_rd_truth(&g, &cfg);
        let next = crate::rdgcn::rd_forward(&p, &g, &profile).unwrap();
        for (a, b) in next.iter().zip(&profile) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(linear_step_bound(&g, &p) <= 1.0 + 1e-12);
    }

    #[test]
    fn noiseless_residuals_vanish() {
        let s = synth_rd(&small_cfg()).unwrap();
        let res = rd_residuals(&s.params, &s.graph, &s.table).unwrap();
        assert!(res.iter().flatten().all(|r| r.unwrap().abs() < 1e-12));
    }

    #[test]
    fn segments_restart_behind_unobserved_rows() {
        let cfg = SynthConfig {
            segment_len: Some(10),
            ..small_cfg()
        };
        let s = synth_rd(&cfg).unwrap();
        for t in 0..s.table.len() {
            let gap = t > 0 && t % 10 == 0;
            assert_eq!(s.table.row_mask(t).iter().all(|&m| !m), gap, "row {t}");
        }
        let res = rd_residuals(&s.params, &s.graph, &s.table).unwrap();
        for (t, row) in res.iter().enumerate() {
            let touches_gap = (t + 1) % 10 == 0 || (t > 0 && t % 10 == 0);
            assert_eq!(row.iter().all(|r| r.is_none()), touches_gap, "pair {t}");
            assert!(row.iter().flatten().all(|r| r.abs() < 1e-12));
        }
    }

    #[test]
    fn residuals_recover_injected_terms() {
        let cfg = SynthConfig {
            g_pattern: PatternKind::SymmetricPeriodic,
            noise_sd: 0.1,
            ..small_cfg()
        };
        let s = synth_rd(&cfg).unwrap();
        let res = rd_residuals(&s.params, &s.graph, &s.table).unwrap();
        for (row, inj) in res.iter().zip(&s.injected) {
            for (r, g) in row.iter().zip(inj) {
                assert!((r.unwrap() - g).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_rd(&small_cfg()).unwrap();
        let b = synth_rd(&small_cfg()).unwrap();
        assert_eq!(a.table, b.table);
        let c = synth_rd(&SynthConfig { seed: 1, ..small_cfg() }).unwrap();
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn unstable_truth_is_rejected() {
        let cfg = small_cfg();
        let g = build_topology(&cfg).unwrap();
        let (mut p, profile) = sample_rd_truth(&g, &cfg);
        p.rho.as_mut_slice()[0] = 3.0;
        assert!(matches!(
            synth_rd_with(&cfg, g, p, profile),
            Err(Error::UnstableGenerator(_))
        ));
    }

    #[test]
    fn shifted_pattern_is_antiphase() {
        let cfg = SynthConfig {
            g_pattern: PatternKind::SymmetricPeriodic,
            ..small_cfg()
        };
        let target = SynthConfig {
            g_pattern: PatternKind::ShiftedPeriodic,
            ..cfg.clone()
        };
        let ph = cfg.phases();
        assert_eq!(ph, target.phases());
        for t in 0..50 {
            for (a, b) in cfg.pattern().row(t, &ph).iter().zip(target.pattern().row(t, &ph)) {
                assert!((a + b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sir_conserves_population() {
        let s = synth_sir(&SynthConfig {
            n: 5,
            horizon: 30,
            episodes: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        for ep in &s.episodes {
            for t in 0..ep.infectious.len() {
                for v in 0..5 {
                    let total = ep.susceptible[t][v] + ep.infectious[t][v] + ep.recovered[t][v];
                    assert!((total - s.population[v]).abs() <= 1e-9 * s.population[v]);
                }
            }
        }
        assert_eq!(s.table.len(), 60);
    }

    #[test]
    fn sir_zero_contact_decays_geometrically() {
        let phi = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let pop = [100.0, 100.0];
        let (mut s, mut i, mut r) = (vec![50.0; 2], vec![10.0; 2], vec![40.0; 2]);
        for _ in 0..5 {
            let (s2, i2, r2) = sir_euler_step(&phi, &[0.0, 0.0], 0.25, &pop, &s, &i, &r);
            assert!((i2[0] - 0.75 * i[0]).abs() < 1e-12);
            (s, i, r) = (s2, i2, r2);
        }
        let _ = (s, r);
        // gamma = 0: I never decreases while S > 0.
        let (mut s, mut i, mut r) = (vec![50.0; 2], vec![10.0; 2], vec![40.0; 2]);
        for _ in 0..20 {
            let (s2, i2, r2) = sir_euler_step(&phi, &[0.5, 0.5], 0.0, &pop, &s, &i, &r);
            assert!(i2[0] >= i[0]);
            (s, i, r) = (s2, i2, r2);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig { n: 0, ..SynthConfig::default() }.validate().is_err());
        assert!(SynthConfig { gamma: 1.5, ..SynthConfig::default() }.validate().is_err());
        assert!(SynthConfig { start_week: "x".into(), ..SynthConfig::default() }.validate().is_err());
    }
}
