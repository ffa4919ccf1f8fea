use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("every target in the batch is masked")]
    AllMasked,

    #[error("series too short: need at least {needed} time steps, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("degenerate travelling population at vertex {vertex}")]
    DegeneratePopulation { vertex: usize },

    #[error("non-finite gradient entry at index {index}")]
    NonFiniteGradient { index: usize },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("task {task} has {len} samples, cannot split into support and query halves")]
    TaskTooSmall { task: usize, len: usize },

    #[error("trajectory diverged at step {step}: |x| reached {magnitude:e}")]
    TrajectoryDiverged { step: usize, magnitude: f64 },

    #[error("unstable generator: {0}")]
    UnstableGenerator(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("assumption check failed: {0}")]
    Assumption(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("interrupted; partial history written to {0}")]
    Interrupted(PathBuf),

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
