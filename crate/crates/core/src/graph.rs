//! Directed sensor/region graphs and the weighted neighbor-difference operator.
//!
//! Storage is an edge list plus an out-adjacency index of edge ids, so every
//! operator below runs in `O(|E| + n)` without materializing dense matrices.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};

/// A directed graph on vertices `0..n` without self-loops or duplicate edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    /// Edge ids leaving each vertex, in edge-list order.
    out_edges: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for DirectedGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        DirectedGraph::new(r.n, r.edges)
    }
}

impl From<DirectedGraph> for GraphRepr {
    fn from(g: DirectedGraph) -> Self {
        GraphRepr {
            n: g.n,
            edges: g.edges,
        }
    }
}

impl DirectedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("vertex count must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut out_edges = vec![Vec::new(); n];
        for (id, &(src, dst)) in edges.iter().enumerate() {
            if src >= n || dst >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({src},{dst}) out of range for {n} vertices"
                )));
            }
            if src == dst {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {src}")));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({src},{dst})")));
            }
            out_edges[src].push(id);
        }
        Ok(Self {
            n,
            edges,
            out_edges,
        })
    }

    /// Like [`DirectedGraph::new`], additionally rejecting antiparallel pairs.
    ///
    /// Road sensors measure one direction of travel, so traffic graphs never
    /// hold both `(i,j)` and `(j,i)`.
    pub fn new_one_directional(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let g = Self::new(n, edges)?;
        g.check_one_directional()?;
        Ok(g)
    }

    pub fn check_one_directional(&self) -> Result<()> {
        let set: HashSet<_> = self.edges.iter().copied().collect();
        match self.edges.iter().find(|&&(i, j)| set.contains(&(j, i))) {
            Some(&(i, j)) => Err(Error::InvalidGraph(format!(
                "both ({i},{j}) and ({j},{i}) present in a one-directional graph"
            ))),
            None => Ok(()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Ids of the edges leaving `v`.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    /// Edge-transposed graph; the edge at index `k` of the result is the
    /// reverse of edge `k` of `self`.
    pub fn reaction_graph(&self) -> DirectedGraph {
        let edges: Vec<_> = self.edges.iter().map(|&(i, j)| (j, i)).collect();
        let mut out_edges = vec![Vec::new(); self.n];
        for (id, &(src, _)) in edges.iter().enumerate() {
            out_edges[src].push(id);
        }
        DirectedGraph {
            n: self.n,
            edges,
            out_edges,
        }
    }

    /// Hex SHA-256 over the vertex count and edge list, used to tie checkpoints
    /// to the graph they were trained on.
    pub fn edge_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for &(i, j) in &self.edges {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// One finite real per edge, in edge-list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeWeights(Vec<f64>);

impl EdgeWeights {
    pub fn new(values: Vec<f64>, g: &DirectedGraph) -> Result<Self> {
        check_len("edge weights", g.num_edges(), values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("edge weight {k} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(g: &DirectedGraph) -> Self {
        Self(vec![0.0; g.num_edges()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `(L x)_i = sum over edges (i,j) of w_(i,j) * (x_j - x_i)`.
///
/// Vertices without outgoing edges map to zero.
pub fn apply_weighted_laplacian(g: &DirectedGraph, w: &EdgeWeights, x: &[f64]) -> Result<Vec<f64>> {
    check_len("edge weights", g.num_edges(), w.len())?;
    check_len("vertex features", g.n(), x.len())?;
    let w = w.as_slice();
    Ok((0..g.n())
        .map(|i| {
            g.out_edges(i)
                .iter()
                .map(|&e| w[e] * (x[g.edges[e].1] - x[i]))
                .sum()
        })
        .collect())
}

/// Gathers each vertex's out-neighbor features in edge order.
pub fn neighbor_select(x: &[f64], g: &DirectedGraph) -> Result<Vec<Vec<f64>>> {
    check_len("vertex features", g.n(), x.len())?;
    Ok((0..g.n())
        .map(|i| g.out_edges(i).iter().map(|&e| x[g.edges[e].1]).collect())
        .collect())
}
