//! JSON checkpoints holding the graph and the trained parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::io::write_file;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::rdgcn::{RdModel, RdParams};
use crate::sirgcn::{SirModel, SirParams};

pub const CHECKPOINT_FORMAT: &str = "odegcn-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Rd(RdParams),
    Sir(SirParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: String,
    pub n: usize,
    pub edge_hash: String,
    pub graph: DirectedGraph,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(graph: &DirectedGraph, params: ModelParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: crate::VERSION.into(),
            n: graph.n(),
            edge_hash: graph.edge_hash(),
            graph: graph.clone(),
            params,
        }
    }

    pub fn from_rd(model: &RdModel) -> Self {
        Self::new(model.graph(), ModelParams::Rd(model.rd_params().clone()))
    }

    pub fn from_sir(model: &SirModel) -> Self {
        Self::new(model.graph(), ModelParams::Sir(model.sir_params().clone()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.verify()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn verify(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.n != self.graph.n() || self.edge_hash != self.graph.edge_hash() {
            return Err(Error::Checkpoint("stored graph does not match its vertex count or edge hash".into()));
        }
        match &self.params {
            ModelParams::Rd(p) => p.validate(&self.graph),
            ModelParams::Sir(p) => p.validate(&self.graph),
        }
        .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    /// Fails unless `graph` has the edge list the checkpoint was trained on.
    pub fn check_graph(&self, graph: &DirectedGraph) -> Result<()> {
        if graph.edge_hash() != self.edge_hash {
            return Err(Error::Checkpoint(format!(
                "edge hash mismatch: checkpoint {} vs supplied {}",
                self.edge_hash,
                graph.edge_hash()
            )));
        }
        Ok(())
    }
}
