//! Synthetic experiments on domain shift.
//!
//! Both domains share the input distribution and the one-step dynamics `F`;
//! they differ only in the pattern term, so target labels relabel the source
//! inputs: `y_target(t) = x(t+1) - G_s(t) + G_target(t)`. The window regressor
//! sees twelve steps of every vertex and can learn `G_s`; the RD model sees one
//! step of its neighbors and can only learn `F`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::synth::{build_topology, sample_rd_truth, synth_rd, synth_sir, PatternKind, SynthConfig, Topology};
use crate::data::{periodic_starts, sir_samples, Pair, TimeSeriesTable};
use crate::error::{Error, Result};
use crate::loss::{Forecaster, LossKind};
use crate::optimize::{train, TrainConfig};
use crate::rdgcn::{rd_residuals, RdModel, RdParams};
use crate::sirgcn::{SirModel, SirParams};

use super::checks::{check_negative_correlation, check_symmetry, CorrelationReport, SymmetryReport};
use super::metrics::{per_pair_mae, MetricsReport};
use super::window::{window_samples, WindowRegressor, WindowSample};

fn lab_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        max_epochs: 300,
        patience: 30,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    /// Source generator; `seed` is replaced per trial, `truth_seed` fixes the
    /// graph, dynamics and pattern phases shared by every trial.
    pub source: SynthConfig,
    /// Target pattern; only its `g_*` fields are used.
    pub target: SynthConfig,
    pub seeds: usize,
    pub base_seed: u64,
    pub window: usize,
    pub ridge_lambda: f64,
    /// Share of each series held out for evaluating both domains.
    pub test_fraction: f64,
    pub train: TrainConfig,
    pub sample_size: SampleSizeConfig,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        let source = SynthConfig {
            n: 10,
            horizon: 601,
            g_pattern: PatternKind::SymmetricPeriodic,
            g_amplitude: 1.0,
            noise_sd: 0.1,
            truth_seed: Some(7),
            ..SynthConfig::default()
        };
        let target = SynthConfig {
            g_pattern: PatternKind::ShiftedPeriodic,
            g_amplitude: 1.5,
            ..source.clone()
        };
        Self {
            source,
            target,
            seeds: 20,
            base_seed: 0,
            window: 12,
            ridge_lambda: 1e-2,
            test_fraction: 0.25,
            train: lab_train_config(),
            sample_size: SampleSizeConfig::default(),
        }
    }
}

impl TheoryConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.target.validate()?;
        self.train.validate()?;
        if self.seeds == 0 {
            return Err(Error::Config("theory lab needs at least one seed".into()));
        }
        if self.window < 2 {
            return Err(Error::Config("window length must be at least 2".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0,1)".into()));
        }
        Ok(())
    }

    fn source_for(&self, trial: usize) -> SynthConfig {
        SynthConfig {
            seed: self.base_seed.wrapping_add(trial as u64),
            truth_seed: Some(self.source.truth_seed.unwrap_or(self.base_seed)),
            ..self.source.clone()
        }
    }
}

/// Source and target loss of one trained hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisLoss {
    pub source: f64,
    pub target: f64,
    pub gap: f64,
}

impl HypothesisLoss {
    pub fn new(source: f64, target: f64) -> Self {
        Self {
            source,
            target,
            gap: (source - target).abs(),
        }
    }

    /// The same hypothesis with the domains' roles exchanged.
    pub fn swapped(self) -> Self {
        Self::new(self.target, self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    /// Window regressor (full-graph history).
    pub h1: Option<HypothesisLoss>,
    /// RD model (one step of neighbors).
    pub h2: Option<HypothesisLoss>,
    /// Why the trial was invalidated, if it was.
    pub invalid: Option<String>,
    #[serde(skip)]
    curves: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    /// Largest gap over the pool of trained hypotheses.
    pub disc: f64,
    pub mean_gap: f64,
    pub standard_error: f64,
    pub pool_size: usize,
}

fn summarize(gaps: &[f64]) -> ClassSummary {
    let k = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / k;
    let var = if gaps.len() > 1 {
        gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    ClassSummary {
        disc: gaps.iter().copied().fold(0.0, f64::max),
        mean_gap: mean,
        standard_error: (var / k).sqrt(),
        pool_size: gaps.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub loss_kind: LossKind,
    pub seeds: Vec<u64>,
    pub trials: Vec<TrialResult>,
    pub invalid_trials: usize,
    pub h1: ClassSummary,
    pub h2: ClassSummary,
    /// `sqrt(se_h1^2 + se_h2^2)` of the per-trial gaps.
    pub pooled_standard_error: f64,
    /// `disc(H2) <= disc(H1) + pooled standard error`.
    pub bound_holds: bool,
    pub note: String,
}

impl DiscrepancyReport {
    /// Aligned text summary.
    pub fn table(&self) -> String {
        let mut out = format!(
            "loss {}  trials {}  invalid {}\n{:<14} {:>10} {:>10} {:>10} {:>6}\n",
            self.loss_kind,
            self.trials.len(),
            self.invalid_trials,
            "class",
            "disc",
            "mean gap",
            "std err",
            "pool"
        );
        for (name, c) in [("H1 window", &self.h1), ("H2 rdgcn", &self.h2)] {
            out.push_str(&format!(
                "{:<14} {:>10.4} {:>10.4} {:>10.4} {:>6}\n",
                name, c.disc, c.mean_gap, c.standard_error, c.pool_size
            ));
        }
        out.push_str(&format!(
            "disc(H2) {:.4} <= disc(H1) {:.4} + pooled SE {:.4}: {}\n",
            self.h2.disc,
            self.h1.disc,
            self.pooled_standard_error,
            if self.bound_holds { "yes" } else { "no" }
        ));
        out
    }

    /// Mean per-time MAE curves over valid trials as `time,model,mae` rows.
    pub fn curves_csv(&self) -> String {
        let mut acc: std::collections::BTreeMap<(String, String), (f64, usize)> = Default::default();
        for t in &self.trials {
            for (time, model, mae) in &t.curves {
                let e = acc.entry((model.clone(), time.clone())).or_insert((0.0, 0));
                e.0 += mae;
                e.1 += 1;
            }
        }
        let mut out = String::from("time,model,mae\n");
        for ((model, time), (sum, k)) in acc {
            out.push_str(&format!("{time},{model},{}\n", sum / k as f64));
        }
        out
    }
}

/// Source pairs, matching target pairs and the pattern samples of both domains.
struct DomainPair {
    table: TimeSeriesTable,
    train: Vec<Pair>,
    val: Vec<Pair>,
    test_source: Vec<Pair>,
    test_target: Vec<Pair>,
    graph: crate::graph::DirectedGraph,
}

fn relabel(p: &Pair, g_s: &[f64], g_t: &[f64]) -> Pair {
    let mut q = p.clone();
    for i in 0..q.target.len() {
        q.target[i] += g_t[i] - g_s[i];
    }
    q
}

fn build_domains(cfg: &TheoryConfig, trial: usize) -> Result<DomainPair> {
    let src = cfg.source_for(trial);
    let synth = synth_rd(&src)?;
    let target_pattern = cfg.target.pattern();
    let pairs: Vec<Pair> = synth.table.pairs().into_iter().filter(|p| p.t + 1 >= cfg.window).collect();
    let cut = pairs.len() - (pairs.len() as f64 * cfg.test_fraction).round() as usize;
    let (fit, test) = pairs.split_at(cut);
    let val_cut = crate::data::ratio_split(fit.len(), (3, 1));
    let test_target = test
        .iter()
        .map(|p| relabel(p, &synth.pattern[p.t], &target_pattern.row(p.t, &synth.phases)))
        .collect();
    Ok(DomainPair {
        table: synth.table,
        train: fit[..val_cut].to_vec(),
        val: fit[val_cut..].to_vec(),
        test_source: test.to_vec(),
        test_target,
        graph: synth.graph,
    })
}

fn run_trial(cfg: &TheoryConfig, trial: usize, kind: LossKind) -> Result<TrialResult> {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let d = build_domains(cfg, trial)?;
    let mut result = TrialResult {
        seed,
        h1: None,
        h2: None,
        invalid: None,
        curves: Vec::new(),
    };
    let labels = |pairs: &[Pair]| -> Vec<String> { pairs.iter().map(|p| d.table.timestamps().label(p.t + 1)).collect() };
    let mut curve = |name: &str, preds: &[Vec<Option<f64>>], pairs: &[Pair]| {
        for (time, mae) in labels(pairs).into_iter().zip(per_pair_mae(preds, pairs)) {
            if let Some(m) = mae {
                result.curves.push((time, name.to_string(), m));
            }
        }
    };

    let mut model = RdModel::new(d.graph.clone(), RdParams::init_random(&d.graph, seed))?;
    let train_cfg = TrainConfig {
        loss_kind: kind,
        seed,
        ..cfg.train.clone()
    };
    match train(&mut model, &d.train, &d.val, &train_cfg) {
        Ok(_) => {
            let h2 = HypothesisLoss::new(model.loss(&d.test_source, kind)?, model.loss(&d.test_target, kind)?);
            for (name, set) in [("rdgcn-source", &d.test_source), ("rdgcn-target", &d.test_target)] {
                let preds = set.iter().map(|p| model.predict_pair(p)).collect::<Result<Vec<_>>>()?;
                curve(name, &preds, set);
            }
            result.h2 = Some(h2);
        }
        Err(e @ Error::Diverged { .. }) => {
            result.invalid = Some(format!("rdgcn: {e}"));
            return Ok(result);
        }
        Err(e) => return Err(e),
    }

    let fit_pairs: Vec<Pair> = d.train.iter().chain(&d.val).cloned().collect();
    let fit = window_samples(&d.table, &fit_pairs, cfg.window);
    let reg = WindowRegressor::fit(&fit, cfg.window, cfg.ridge_lambda)?;
    let src: Vec<WindowSample> = window_samples(&d.table, &d.test_source, cfg.window);
    let tgt: Vec<WindowSample> = window_samples(&d.table, &d.test_target, cfg.window);
    result.h1 = Some(HypothesisLoss::new(reg.loss(&src, kind)?, reg.loss(&tgt, kind)?));
    for (name, set, pairs) in [("window-source", &src, &d.test_source), ("window-target", &tgt, &d.test_target)] {
        let preds = set.iter().map(|s| reg.predict_sample(s)).collect::<Result<Vec<_>>>()?;
        curve(name, &preds, pairs);
    }
    Ok(result)
}

/// Residuals of the true source dynamics, which are the injected pattern plus
/// noise.
pub fn source_residuals(cfg: &TheoryConfig) -> Result<Vec<f64>> {
    let synth = synth_rd(&cfg.source_for(0))?;
    let res = rd_residuals(&synth.params, &synth.graph, &synth.table)?;
    Ok(res.into_iter().flatten().flatten().collect())
}

/// Paired source and target pattern samples over one series.
pub fn pattern_samples(cfg: &TheoryConfig) -> (Vec<f64>, Vec<f64>) {
    let src = cfg.source_for(0);
    let phases = src.phases();
    let (s, t) = (src.pattern(), cfg.target.pattern());
    let mut gs = Vec::new();
    let mut gt = Vec::new();
    for step in 0..src.horizon - 1 {
        gs.extend(s.row(step, &phases));
        gt.extend(t.row(step, &phases));
    }
    (gs, gt)
}

/// Trains both hypothesis classes on `cfg.seeds` source series and compares
/// their empirical discrepancies under `kind`.
///
/// The supremum over near-optimal hypotheses is approximated by the maximum
/// over the pool of trained models; the pool size is reported.
pub fn discrepancy_experiment(cfg: &TheoryConfig, kind: LossKind) -> Result<DiscrepancyReport> {
    cfg.validate()?;
    let trials = (0..cfg.seeds)
        .into_par_iter()
        .map(|k| run_trial(cfg, k, kind))
        .collect::<Result<Vec<_>>>()?;
    let valid: Vec<&TrialResult> = trials.iter().filter(|t| t.invalid.is_none()).collect();
    if valid.is_empty() {
        return Err(Error::Diverged {
            epoch: 0,
            detail: "every theory-lab trial diverged".into(),
        });
    }
    let h1 = summarize(&valid.iter().filter_map(|t| t.h1.map(|h| h.gap)).collect::<Vec<_>>());
    let h2 = summarize(&valid.iter().filter_map(|t| t.h2.map(|h| h.gap)).collect::<Vec<_>>());
    let pooled = (h1.standard_error.powi(2) + h2.standard_error.powi(2)).sqrt();
    Ok(DiscrepancyReport {
        loss_kind: kind,
        seeds: trials.iter().map(|t| t.seed).collect(),
        invalid_trials: trials.len() - valid.len(),
        bound_holds: h2.disc <= h1.disc + pooled,
        h1,
        h2,
        pooled_standard_error: pooled,
        trials,
        note: "disc is the maximum gap over the trained pool, an under-approximation of the supremum".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryLabReport {
    pub version: String,
    pub symmetry: SymmetryReport,
    pub correlation: CorrelationReport,
    pub mae: DiscrepancyReport,
    /// Run only when the negative-correlation check passes.
    pub mse: Option<DiscrepancyReport>,
    pub mse_skipped: Option<String>,
}

/// Checks the symmetry assumption, runs the MAE experiment, and runs the MSE
/// variant when the patterns are negatively correlated.
pub fn run_theory_lab(cfg: &TheoryConfig) -> Result<TheoryLabReport> {
    cfg.validate()?;
    let symmetry = check_symmetry(&source_residuals(cfg)?)?;
    if !symmetry.passed {
        return Err(Error::Assumption(format!(
            "source residuals are not symmetric about 0 (mean {:.4}, median {:.4}, skewness {:.3}); rule: {}",
            symmetry.mean, symmetry.median, symmetry.skewness, symmetry.rule
        )));
    }
    let (gs, gt) = pattern_samples(cfg);
    let correlation = check_negative_correlation(&gs, &gt)?;
    let mae = discrepancy_experiment(cfg, LossKind::Mae)?;
    let (mse, mse_skipped) = if correlation.passed {
        (Some(discrepancy_experiment(cfg, LossKind::Mse)?), None)
    } else {
        (
            None,
            Some(format!(
                "E[G_s G_target] = {:.4} is not <= 0 within one standard error",
                correlation.mean_product
            )),
        )
    };
    Ok(TheoryLabReport {
        version: crate::VERSION.into(),
        symmetry,
        correlation,
        mae,
        mse,
        mse_skipped,
    })
}

/// Sample-size experiment for the one-step model under a symmetric pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSizeConfig {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub seeds: usize,
    pub test_size: usize,
    /// Standard deviation of the sampled states around equilibrium.
    pub state_spread: f64,
    pub amplitude: f64,
    pub period: f64,
    pub noise_sd: f64,
    pub truth_seed: u64,
    pub train: TrainConfig,
}

impl Default for SampleSizeConfig {
    fn default() -> Self {
        Self {
            n: 10,
            sizes: vec![100, 1000, 10000],
            seeds: 3,
            test_size: 2000,
            state_spread: 3.0,
            amplitude: 1.0,
            period: 24.0,
            noise_sd: 0.0,
            truth_seed: 7,
            train: lab_train_config(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeReport {
    pub loss_kind: LossKind,
    pub sizes: Vec<usize>,
    /// Held-out loss against noise-free, pattern-free labels, `[size][seed]`.
    pub distances: Vec<Vec<f64>>,
    pub mean_distance: Vec<f64>,
    /// Mean distance strictly decreases with every larger sample size.
    pub monotone: bool,
}

struct SampleSizeTruth {
    graph: crate::graph::DirectedGraph,
    params: RdParams,
    profile: Vec<f64>,
    phases: Vec<f64>,
}

fn sample_size_truth(cfg: &SampleSizeConfig) -> Result<SampleSizeTruth> {
    let synth = SynthConfig {
        n: cfg.n,
        topology: Topology::RandomOneDirectional,
        seed: cfg.truth_seed,
        ..SynthConfig::default()
    };
    let graph = build_topology(&synth)?;
    let (params, profile) = sample_rd_truth(&graph, &synth);
    let phases = synth.phases();
    Ok(SampleSizeTruth {
        graph,
        params,
        profile,
        phases,
    })
}

/// Independent states around equilibrium with labels `x + F(x) + G + noise`,
/// where `G_i = a sin(2 pi u / P + phase_i)` for a uniform time `u`, and the
/// matching `F`-only labels.
fn sample_size_samples(
    truth: &SampleSizeTruth,
    model: &RdModel,
    cfg: &SampleSizeConfig,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Pair>, Vec<Pair>)> {
    let spread = Normal::new(0.0, cfg.state_spread).map_err(|e| Error::Config(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut noisy = Vec::with_capacity(count);
    let mut clean = Vec::with_capacity(count);
    for t in 0..count {
        let x: Vec<f64> = truth.profile.iter().map(|c| c + spread.sample(rng)).collect();
        let f = model.forward(&x)?;
        let u = rng.random_range(0.0..cfg.period);
        let y: Vec<f64> = f
            .iter()
            .zip(&truth.phases)
            .map(|(fx, ph)| fx + cfg.amplitude * (TAU * u / cfg.period + ph).sin() + noise.sample(rng))
            .collect();
        noisy.push(Pair::fully_observed(t, x.clone(), y));
        clean.push(Pair::fully_observed(t, x, f));
    }
    Ok((noisy, clean))
}

/// Trains the RD model on growing samples with a symmetric pattern and
/// measures its held-out distance to the true one-step map.
pub fn sample_size_experiment(cfg: &SampleSizeConfig, kind: LossKind) -> Result<SampleSizeReport> {
    if cfg.sizes.is_empty() || cfg.seeds == 0 || cfg.test_size == 0 || cfg.sizes.iter().any(|&m| m < 4) {
        return Err(Error::Config("sample_size needs sizes of at least 4, seeds and a test set".into()));
    }
    cfg.train.validate()?;
    let truth = sample_size_truth(cfg)?;
    let true_model = RdModel::new(truth.graph.clone(), truth.params.clone())?;
    let mut test_rng = ChaCha8Rng::seed_from_u64(cfg.truth_seed);
    test_rng.set_stream(99);
    let (_, test) = sample_size_samples(&truth, &true_model, cfg, cfg.test_size, &mut test_rng)?;

    let jobs: Vec<(usize, usize)> = (0..cfg.sizes.len()).flat_map(|s| (0..cfg.seeds).map(move |k| (s, k))).collect();
    let results = jobs
        .par_iter()
        .map(|&(s, k)| -> Result<f64> {
            let m = cfg.sizes[s];
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            rng.set_stream(m as u64);
            let (samples, _) = sample_size_samples(&truth, &true_model, cfg, m, &mut rng)?;
            let cut = crate::data::ratio_split(m, (3, 1));
            let mut model = RdModel::new(truth.graph.clone(), RdParams::init_random(&truth.graph, k as u64))?;
            let train_cfg = TrainConfig {
                loss_kind: kind,
                seed: k as u64,
                ..cfg.train.clone()
            };
            train(&mut model, &samples[..cut], &samples[cut..], &train_cfg)?;
            model.loss(&test, kind)
        })
        .collect::<Result<Vec<_>>>()?;
    let distances: Vec<Vec<f64>> = results.chunks(cfg.seeds).map(<[f64]>::to_vec).collect();
    let mean_distance: Vec<f64> = distances.iter().map(|d| d.iter().sum::<f64>() / d.len() as f64).collect();
    Ok(SampleSizeReport {
        loss_kind: kind,
        sizes: cfg.sizes.clone(),
        monotone: mean_distance.windows(2).all(|w| w[1] < w[0]),
        distances,
        mean_distance,
    })
}

/// Shared versus per-vertex infection rates on synthetic SIR data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SirComparisonConfig {
    pub synth: SynthConfig,
    pub seeds: usize,
    /// Episodes used for training and validation; the rest are tested.
    pub train_episodes: usize,
    pub val_episodes: usize,
    pub train: TrainConfig,
}

impl Default for SirComparisonConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig {
                n: 8,
                horizon: 30,
                episodes: 8,
                ..SynthConfig::default()
            },
            seeds: 5,
            train_episodes: 5,
            val_episodes: 1,
            train: TrainConfig {
                learning_rate: 0.05,
                max_epochs: 300,
                patience: 30,
                batch_size: 32,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirComparisonReport {
    pub seeds: Vec<u64>,
    /// Test metrics of the shared-rate model per seed.
    pub single: Vec<MetricsReport>,
    /// Test metrics of the per-vertex-rate model per seed.
    pub per_vertex: Vec<MetricsReport>,
    pub mean_mae_single: f64,
    pub mean_mae_per_vertex: f64,
    /// Seeds on which the per-vertex model's test MAE is at most the shared one's.
    pub per_vertex_wins: usize,
}

pub fn sir_comparison(cfg: &SirComparisonConfig) -> Result<SirComparisonReport> {
    cfg.train.validate()?;
    if cfg.train_episodes + cfg.val_episodes >= cfg.synth.episodes || cfg.train_episodes == 0 || cfg.val_episodes == 0 {
        return Err(Error::Config("episodes must cover train, validation and test".into()));
    }
    let per_seed = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|seed| -> Result<(MetricsReport, MetricsReport)> {
            let synth = synth_sir(&SynthConfig {
                seed,
                ..cfg.synth.clone()
            })?;
            let starts = periodic_starts(synth.table.len(), synth.period);
            let samples = sir_samples(&synth.table, &synth.table.pairs(), &synth.population, &starts, synth.susceptible_fraction)?;
            let episode = |s: &crate::sirgcn::SirSample| s.pair.t / synth.period;
            let pick = |lo: usize, hi: usize| -> Vec<_> {
                samples.iter().filter(|s| (lo..hi).contains(&episode(s))).cloned().collect()
            };
            let tr = pick(0, cfg.train_episodes);
            let va = pick(cfg.train_episodes, cfg.train_episodes + cfg.val_episodes);
            let te = pick(cfg.train_episodes + cfg.val_episodes, usize::MAX);
            let fit = |single: bool| -> Result<MetricsReport> {
                let mut m = SirModel::new(synth.graph.clone(), SirParams::init(&synth.graph, single, seed))?;
                let train_cfg = TrainConfig {
                    seed,
                    ..cfg.train.clone()
                };
                train(&mut m, &tr, &va, &train_cfg)?;
                let preds = te.iter().map(|s| m.predict_sample(s)).collect::<Result<Vec<_>>>()?;
                let pairs: Vec<Pair> = te.iter().map(|s| s.pair.clone()).collect();
                MetricsReport::from_predictions(&preds, &pairs)
            };
            Ok((fit(true)?, fit(false)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (single, per_vertex): (Vec<_>, Vec<_>) = per_seed.into_iter().unzip();
    let mean = |v: &[MetricsReport]| v.iter().map(|r| r.mae).sum::<f64>() / v.len() as f64;
    Ok(SirComparisonReport {
        seeds: (0..cfg.seeds as u64).collect(),
        mean_mae_single: mean(&single),
        mean_mae_per_vertex: mean(&per_vertex),
        per_vertex_wins: single.iter().zip(&per_vertex).filter(|(s, p)| p.mae <= s.mae).count(),
        single,
        per_vertex,
    })
}
