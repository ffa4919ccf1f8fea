//! The `odegcn` command line.

pub mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Once;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{DataConfig, EvalConfig, ModelKind, Overrides, Regime, RunConfig};

use crate::checkpoint::{Checkpoint, ModelParams};
use crate::data::{
    approximate_population, build_split, load_edges, load_populations, load_series, periodic_starts, season_starts,
    sir_samples, synth_rd, synth_sir, write_edges, write_populations, write_series, Pair, Split, TimeSeriesTable,
};
use crate::data::io::write_file;
use crate::error::{Error, Result};
use crate::eval::{check_symmetry, sample_size_experiment, run_theory_lab, MetricsReport, SymmetryReport};
use crate::gradcheck::{gradcheck_table, run_gradcheck, FamilySummary};
use crate::graph::DirectedGraph;
use crate::loss::{Forecaster, LossKind};
use crate::optimize::{history_csv, maml_init, train_with_hooks, TrainHooks, TrainOutcome};
use crate::rdgcn::{RdModel, RdParams};
use crate::sirgcn::{SirModel, SirParams, SirSample};

#[derive(Debug, Parser)]
#[command(name = "odegcn", version, about = "Domain-ODE graph forecasting: synthesis, training, evaluation and the theory lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelKind>,
    /// Meta-initialize with first-order MAML before training.
    #[arg(long, global = true)]
    pub maml: bool,
    /// Training loss: mae or mse.
    #[arg(long, global = true)]
    pub loss: Option<LossKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known dynamics.
    Synth,
    /// Train a model and write a checkpoint and its history.
    Train,
    /// Score a checkpoint on one regime of a dataset.
    Eval,
    /// Compare analytic and finite-difference gradients on random instances.
    Gradcheck,
    /// Run the domain-shift discrepancy and sample-size experiments.
    TheoryLab,
    /// Check that a trained model's residuals are symmetric about zero.
    Assumptions,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            model: self.model,
            maml: self.maml,
            loss: self.loss,
        }
    }
}

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

fn install_interrupt_handler() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        // A second handler cannot be installed in the same process; training
        // then simply runs without interrupt support.
        let _ = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst));
    });
}

/// Parses the process arguments, runs the command and maps the outcome to an
/// exit code: 0 success, 1 a check reported failure, 2 an error.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Runs one command. `Ok(false)` means the command completed but a check it
/// performs did not pass.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.overrides())?;
    run_command(cli.command, &cfg)
}

pub fn run_command(command: Command, cfg: &RunConfig) -> Result<bool> {
    match command {
        Command::Synth => cmd_synth(cfg),
        Command::Train => cmd_train(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::Gradcheck => cmd_gradcheck(cfg),
        Command::TheoryLab => cmd_theory_lab(cfg),
        Command::Assumptions => cmd_assumptions(cfg),
    }
}

/// A report stamped with the library version and configuration hash.
#[derive(Debug, Serialize)]
pub struct Stamped<T> {
    pub version: &'static str,
    pub config_hash: String,
    #[serde(flatten)]
    pub report: T,
}

fn stamp<T>(cfg: &RunConfig, report: T) -> Stamped<T> {
    Stamped {
        version: crate::VERSION,
        config_hash: cfg.hash(),
        report,
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_snapshot(dir: &Path, cfg: &RunConfig) -> Result<()> {
    write_file(&dir.join("resolved_config.toml"), cfg.to_toml()?.as_bytes())
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("data.{key} is not set")))
}

fn cmd_synth(cfg: &RunConfig) -> Result<bool> {
    cfg.synth.validate()?;
    let mut snap = cfg.clone();
    let dir = &cfg.out;
    let series = dir.join("series.csv");
    let edges = dir.join("edges.csv");
    let truth = dir.join("truth.json");
    snap.data.series = Some(series.clone());
    snap.data.edges = Some(edges.clone());
    snap.data.checkpoint = None;
    // Everything is generated before the first file is written.
    match cfg.model {
        ModelKind::Rd => {
            let s = synth_rd(&cfg.synth)?;
            let dir = out_dir(cfg)?;
            write_series(&series, &s.table)?;
            write_edges(&edges, &s.graph)?;
            Checkpoint::new(&s.graph, ModelParams::Rd(s.params.clone())).save(&truth)?;
            write_snapshot(dir, &snap)?;
            println!("synth rd: n {} edges {} rows {} -> {}", s.graph.n(), s.graph.num_edges(), s.table.len(), dir.display());
        }
        ModelKind::Sir => {
            let s = synth_sir(&cfg.synth)?;
            let population = dir.join("population.csv");
            let mut comp = String::from("episode,t,vertex,susceptible,infectious,recovered\n");
            for (k, ep) in s.episodes.iter().enumerate() {
                for t in 0..ep.infectious.len() {
                    for i in 0..s.graph.n() {
                        comp.push_str(&format!(
                            "{k},{t},{i},{},{},{}\n",
                            ep.susceptible[t][i], ep.infectious[t][i], ep.recovered[t][i]
                        ));
                    }
                }
            }
            snap.data.population = Some(population.clone());
            snap.data.period = Some(s.period);
            snap.data.susceptible_fraction = s.susceptible_fraction;
            let dir = out_dir(cfg)?;
            write_series(&series, &s.table)?;
            write_edges(&edges, &s.graph)?;
            write_populations(&population, &s.population)?;
            write_file(&dir.join("compartments.csv"), comp.as_bytes())?;
            Checkpoint::new(&s.graph, ModelParams::Sir(s.params.clone())).save(&truth)?;
            write_snapshot(dir, &snap)?;
            println!(
                "synth sir: n {} edges {} episodes {} x {} weeks -> {}",
                s.graph.n(),
                s.graph.num_edges(),
                s.episodes.len(),
                s.period,
                dir.display()
            );
        }
    }
    Ok(true)
}

/// A loaded dataset split into regimes and converted into model samples.
struct Prepared<S> {
    train: Vec<S>,
    val: Vec<S>,
    test: Vec<S>,
}

impl<S: Clone> Prepared<S> {
    fn regime(&self, r: Regime) -> Vec<S> {
        match r {
            Regime::Train => self.train.clone(),
            Regime::Val => self.val.clone(),
            Regime::Test => self.test.clone(),
            Regime::All => [&self.train[..], &self.val[..], &self.test[..]].concat(),
        }
    }
}

fn load_table(cfg: &RunConfig) -> Result<TimeSeriesTable> {
    load_series(required(&cfg.data.series, "series")?)
}

fn load_graph(cfg: &RunConfig, n: usize) -> Result<DirectedGraph> {
    load_edges(required(&cfg.data.edges, "edges")?, Some(n))
}

fn split_table(cfg: &RunConfig, table: &TimeSeriesTable) -> Result<Split> {
    build_split(table, &cfg.split)
}

fn rd_prepared(split: Split) -> Prepared<Pair> {
    Prepared {
        train: split.train,
        val: split.val,
        test: split.test,
    }
}

fn sir_prepared(cfg: &RunConfig, table: &TimeSeriesTable, split: Split) -> Result<Prepared<SirSample>> {
    let population = match &cfg.data.population {
        Some(p) => load_populations(p)?,
        None => approximate_population(table)?,
    };
    let starts = match cfg.data.period {
        Some(p) => periodic_starts(table.len(), p),
        None => season_starts(table, cfg.data.start_week)?,
    };
    let f = cfg.data.susceptible_fraction;
    Ok(Prepared {
        train: sir_samples(table, &split.train, &population, &starts, f)?,
        val: sir_samples(table, &split.val, &population, &starts, f)?,
        test: sir_samples(table, &split.test, &population, &starts, f)?,
    })
}

fn fit<M: Forecaster>(model: &mut M, data: &Prepared<M::Sample>, cfg: &RunConfig) -> Result<TrainOutcome>
where
    M::Sample: Clone,
{
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::InfeasibleSplit(format!(
            "{} train and {} validation samples",
            data.train.len(),
            data.val.len()
        )));
    }
    if cfg.use_maml {
        maml_init(model, &[data.train.clone()], &cfg.maml, cfg.train.loss_kind)?;
    }
    install_interrupt_handler();
    let hooks = TrainHooks {
        on_step: None,
        interrupt: Some(&INTERRUPTED),
    };
    train_with_hooks(model, &data.train, &data.val, &cfg.train, hooks)
}

#[derive(Debug, Serialize)]
struct TrainReport {
    model: &'static str,
    parameters: usize,
    epochs: usize,
    best_epoch: usize,
    best_val_loss: f64,
    loss_kind: LossKind,
    train_mae: f64,
    train_mse: f64,
    train_samples: usize,
    val_samples: usize,
}

fn finish_training<M: Forecaster>(
    cfg: &RunConfig,
    model: &M,
    data: &Prepared<M::Sample>,
    outcome: &TrainOutcome,
    checkpoint: Checkpoint,
) -> Result<bool> {
    let dir = out_dir(cfg)?;
    let history = dir.join("history.csv");
    write_file(&history, history_csv(&outcome.history).as_bytes())?;
    if outcome.interrupted {
        return Err(Error::Interrupted(history));
    }
    let ckpt = dir.join("checkpoint.json");
    checkpoint.save(&ckpt)?;
    let report = TrainReport {
        model: cfg.model.name(),
        parameters: model.num_params(),
        epochs: outcome.history.len(),
        best_epoch: outcome.best_epoch,
        best_val_loss: outcome.best_val_loss,
        loss_kind: cfg.train.loss_kind,
        train_mae: model.loss(&data.train, LossKind::Mae)?,
        train_mse: model.loss(&data.train, LossKind::Mse)?,
        train_samples: data.train.len(),
        val_samples: data.val.len(),
    };
    println!(
        "train {}: {} params, {} epochs, best epoch {} (val {} {:.6e}), train mse {:.6e}",
        report.model,
        report.parameters,
        report.epochs,
        report.best_epoch,
        report.loss_kind,
        report.best_val_loss,
        report.train_mse
    );
    write_json(&dir.join("train_report.json"), &stamp(cfg, report))?;
    let mut snap = cfg.clone();
    snap.data.checkpoint = Some(ckpt);
    write_snapshot(dir, &snap)?;
    Ok(true)
}

fn cmd_train(cfg: &RunConfig) -> Result<bool> {
    let table = load_table(cfg)?;
    let graph = load_graph(cfg, table.n())?;
    let split = split_table(cfg, &table)?;
    match cfg.model {
        ModelKind::Rd => {
            let data = rd_prepared(split);
            let mut model = RdModel::new(graph.clone(), RdParams::init_random(&graph, cfg.train.seed))?;
            let outcome = fit(&mut model, &data, cfg)?;
            finish_training(cfg, &model, &data, &outcome, Checkpoint::from_rd(&model))
        }
        ModelKind::Sir => {
            let data = sir_prepared(cfg, &table, split)?;
            let params = SirParams::init(&graph, cfg.single_beta, cfg.train.seed);
            let mut model = SirModel::new(graph, params)?;
            let outcome = fit(&mut model, &data, cfg)?;
            finish_training(cfg, &model, &data, &outcome, Checkpoint::from_sir(&model))
        }
    }
}

enum Loaded {
    Rd(RdModel, Prepared<Pair>),
    Sir(SirModel, Prepared<SirSample>),
}

fn load_trained(cfg: &RunConfig) -> Result<Loaded> {
    let ckpt = Checkpoint::load(required(&cfg.data.checkpoint, "checkpoint")?)?;
    let table = load_table(cfg)?;
    if cfg.data.edges.is_some() {
        ckpt.check_graph(&load_graph(cfg, table.n())?)?;
    }
    if ckpt.n != table.n() {
        return Err(Error::Checkpoint(format!("checkpoint has {} vertices, series has {}", ckpt.n, table.n())));
    }
    let split = split_table(cfg, &table)?;
    Ok(match ckpt.params {
        ModelParams::Rd(p) => Loaded::Rd(RdModel::new(ckpt.graph, p)?, rd_prepared(split)),
        ModelParams::Sir(p) => {
            let data = sir_prepared(cfg, &table, split)?;
            Loaded::Sir(SirModel::new(ckpt.graph, p)?, data)
        }
    })
}

/// Masked predictions and the pairs they score.
fn predictions(loaded: &Loaded, regime: Regime) -> Result<(&'static str, Vec<Vec<Option<f64>>>, Vec<Pair>)> {
    match loaded {
        Loaded::Rd(m, d) => {
            let pairs = d.regime(regime);
            let preds = pairs.iter().map(|p| m.predict_pair(p)).collect::<Result<Vec<_>>>()?;
            Ok(("rd", preds, pairs))
        }
        Loaded::Sir(m, d) => {
            let samples = d.regime(regime);
            let preds = samples.iter().map(|s| m.predict_sample(s)).collect::<Result<Vec<_>>>()?;
            Ok(("sir", preds, samples.into_iter().map(|s| s.pair).collect()))
        }
    }
}

#[derive(Debug, Serialize)]
struct EvalReport {
    model: &'static str,
    regime: Regime,
    pairs: usize,
    #[serde(flatten)]
    metrics: MetricsReport,
}

fn cmd_eval(cfg: &RunConfig) -> Result<bool> {
    let loaded = load_trained(cfg)?;
    let (model, preds, pairs) = predictions(&loaded, cfg.eval.regime)?;
    let metrics = MetricsReport::from_predictions(&preds, &pairs)?;
    if !(metrics.mae <= metrics.rmse) {
        return Err(Error::InvalidParams(format!("mae {} exceeds rmse {}", metrics.mae, metrics.rmse)));
    }
    println!(
        "eval {model} on {:?}: mae {:.6} rmse {:.6} scored {} dropped {}",
        cfg.eval.regime, metrics.mae, metrics.rmse, metrics.count, metrics.dropped
    );
    let dir = out_dir(cfg)?;
    let report = EvalReport {
        model,
        regime: cfg.eval.regime,
        pairs: pairs.len(),
        metrics,
    };
    write_json(&dir.join("metrics.json"), &stamp(cfg, report))?;
    write_snapshot(dir, cfg)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct GradcheckReport {
    tolerance: f64,
    step: f64,
    families: Vec<FamilySummary>,
    passed: bool,
}

fn cmd_gradcheck(cfg: &RunConfig) -> Result<bool> {
    let g = &cfg.gradcheck;
    let families = run_gradcheck(g)?;
    print!("{}", gradcheck_table(&families, g.tolerance));
    let passed = families.iter().all(|f| f.passed);
    let dir = out_dir(cfg)?;
    let report = GradcheckReport {
        tolerance: g.tolerance,
        step: g.step,
        families,
        passed,
    };
    write_json(&dir.join("gradcheck.json"), &stamp(cfg, report))?;
    write_snapshot(dir, cfg)?;
    Ok(passed)
}

fn cmd_theory_lab(cfg: &RunConfig) -> Result<bool> {
    let lab = run_theory_lab(&cfg.theory)?;
    print!("{}", lab.mae.table());
    match (&lab.mse, &lab.mse_skipped) {
        (Some(r), _) => print!("\n{}", r.table()),
        (None, Some(why)) => println!("\nmse variant skipped: {why}"),
        (None, None) => {}
    }
    let sample_size = [LossKind::Mae, LossKind::Mse]
        .into_iter()
        .map(|k| sample_size_experiment(&cfg.theory.sample_size, k))
        .collect::<Result<Vec<_>>>()?;
    for r in &sample_size {
        let means: Vec<String> = r.mean_distance.iter().map(|d| format!("{d:.4}")).collect();
        println!(
            "sample sizes {:?} ({}): held-out loss {} monotone {}",
            r.sizes,
            r.loss_kind,
            means.join(" "),
            if r.monotone { "yes" } else { "no" }
        );
    }
    let passed = lab.mae.bound_holds && lab.mse.as_ref().is_none_or(|r| r.bound_holds) && sample_size.iter().all(|r| r.monotone);
    let dir = out_dir(cfg)?;
    write_file(&dir.join("curves.csv"), lab.mae.curves_csv().as_bytes())?;
    if let Some(r) = &lab.mse {
        write_file(&dir.join("curves_mse.csv"), r.curves_csv().as_bytes())?;
    }
    #[derive(Serialize)]
    struct Lab<'a> {
        #[serde(flatten)]
        lab: &'a crate::eval::TheoryLabReport,
        sample_size: &'a [crate::eval::SampleSizeReport],
    }
    write_json(&dir.join("disc_report.json"), &stamp(cfg, Lab { lab: &lab, sample_size: &sample_size }))?;
    write_snapshot(dir, cfg)?;
    Ok(passed)
}

#[derive(Debug, Serialize)]
struct AssumptionReport {
    model: &'static str,
    regime: Regime,
    symmetry: SymmetryReport,
}

fn cmd_assumptions(cfg: &RunConfig) -> Result<bool> {
    let loaded = load_trained(cfg)?;
    let regime = Regime::Train;
    let (model, preds, pairs) = predictions(&loaded, regime)?;
    let residuals: Vec<f64> = preds
        .iter()
        .zip(&pairs)
        .flat_map(|(row, p)| row.iter().zip(&p.target).filter_map(|(pr, y)| pr.map(|v| y - v)))
        .collect();
    let symmetry = check_symmetry(&residuals)?;
    println!(
        "residual symmetry ({model}, {} residuals): mean {:.4} median {:.4} skewness {:.3} -> {}",
        symmetry.samples,
        symmetry.mean,
        symmetry.median,
        symmetry.skewness,
        if symmetry.passed { "symmetric" } else { "not symmetric" }
    );
    let passed = symmetry.passed;
    let dir = out_dir(cfg)?;
    let report = AssumptionReport { model, regime, symmetry };
    write_json(&dir.join("assumptions.json"), &stamp(cfg, report))?;
    write_snapshot(dir, cfg)?;
    Ok(passed)
}
