//! Graph forecasting models whose layers are discretized domain ODEs.

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod optimize;
pub mod rdgcn;
pub mod sirgcn;

pub use error::{Error, Result};
pub use graph::{DirectedGraph, EdgeWeights};
pub use loss::{Forecaster, LossKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
