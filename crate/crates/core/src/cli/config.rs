//! Run configuration: a TOML file with one section per concern, overridden
//! by command-line flags.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, flags.
//! `--seed` replaces every seed in the file (train, split, synth, gradcheck
//! and the theory-lab base seed).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{SplitSpec, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::TheoryConfig;
use crate::gradcheck::GradCheckConfig;
use crate::loss::LossKind;
use crate::optimize::{MamlConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rd,
    Sir,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rd => "rd",
            ModelKind::Sir => "sir",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Train,
    Val,
    Test,
    All,
}

/// Input files and epidemic bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub series: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    /// Per-vertex populations for SIR; approximated from weekly counts when unset.
    pub population: Option<PathBuf>,
    /// Checkpoint read by `eval` and `assumptions`.
    pub checkpoint: Option<PathBuf>,
    /// SIR periods every `period` rows; when unset a period opens at each
    /// `start_week` of the ISO calendar.
    pub period: Option<usize>,
    pub start_week: u32,
    /// `S(t0) / N` at the start of every SIR period.
    pub susceptible_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            series: None,
            edges: None,
            population: None,
            checkpoint: None,
            period: None,
            start_week: 40,
            susceptible_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub regime: Regime,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { regime: Regime::Test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    /// SIR only: one shared infection rate instead of one per vertex.
    pub single_beta: bool,
    /// Meta-initialize with first-order MAML before training.
    pub use_maml: bool,
    pub out: PathBuf,
    pub data: DataConfig,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub maml: MamlConfig,
    pub synth: SynthConfig,
    pub eval: EvalConfig,
    pub gradcheck: GradCheckConfig,
    pub theory: TheoryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Rd,
            single_beta: false,
            use_maml: false,
            out: PathBuf::from("out"),
            data: DataConfig::default(),
            split: SplitSpec::chronological(),
            train: TrainConfig::default(),
            maml: MamlConfig::default(),
            synth: SynthConfig::default(),
            eval: EvalConfig::default(),
            gradcheck: GradCheckConfig::default(),
            theory: TheoryConfig::default(),
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub maml: bool,
    pub loss: Option<LossKind>,
}

impl RunConfig {
    /// Parses a file body. Keys it leaves out keep the values of
    /// [`RunConfig::default`], including inside partially given sections.
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::parse(text).map_err(Error::Config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|msg| Error::Config(format!("{}: {msg}", path.display())))
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let overlay: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
        let mut base = toml::Table::try_from(Self::default()).map_err(|e| e.to_string())?;
        merge(&mut base, overlay);
        toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| e.message().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(config: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = match config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(flags);
        Ok(cfg)
    }

    pub fn apply(&mut self, flags: &Overrides) {
        if let Some(seed) = flags.seed {
            self.train.seed = seed;
            self.split.seed = seed;
            self.synth.seed = seed;
            self.gradcheck.seed = seed;
            self.theory.base_seed = seed;
        }
        if let Some(out) = &flags.out {
            self.out = out.clone();
        }
        if let Some(m) = flags.model {
            self.model = m;
        }
        if flags.maml {
            self.use_maml = true;
        }
        if let Some(l) = flags.loss {
            self.train.loss_kind = l;
        }
    }

    /// First 16 hex digits of the SHA-256 of the configuration with every
    /// path removed, so relocated runs of the same experiment share a hash.
    pub fn hash(&self) -> String {
        let mut stripped = self.clone();
        stripped.out = PathBuf::new();
        stripped.data.series = None;
        stripped.data.edges = None;
        stripped.data.population = None;
        stripped.data.checkpoint = None;
        let json = serde_json::to_string(&stripped).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
