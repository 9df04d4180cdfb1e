//! Undirected simple graphs and the data pipeline built on them: edge-list
//! ingestion, observed-graph splitting, random edge perturbation and the
//! augmented training set.

mod dataset;
mod io;
mod sample;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

pub use dataset::{build_dataset, observed_split, validation_count, Dataset, DatasetManifest, DatasetSpec};
pub use io::{ingest_edge_list, load_edge_list, parse_edge_list, write_edge_list, write_node_map};
pub use sample::{derive_seed, inject_spurious, perturb, perturb_avoiding, split_observed, PerturbationResult};

/// Unordered node pair stored as `(min, max)`.
pub type Edge = (usize, usize);

/// Normalizes an unordered pair. Returns `None` for self-loops.
pub fn edge(u: usize, v: usize) -> Option<Edge> {
    match u.cmp(&v) {
        std::cmp::Ordering::Less => Some((u, v)),
        std::cmp::Ordering::Greater => Some((v, u)),
        std::cmp::Ordering::Equal => None,
    }
}

/// Number of unordered pairs `i < j` among `n` nodes.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of `(i, j)`, `i < j`, in the row-major enumeration
/// `(0,1), (0,2), …, (0,n-1), (1,2), …`.
pub fn pair_index(n: usize, (i, j): Edge) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Undirected, unweighted graph on nodes `0..n` without self-loops.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<Edge>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("node count must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            let e = edge(u, v).ok_or_else(|| Error::InvalidGraph(format!("self-loop on node {u}")))?;
            set.insert(e);
        }
        Ok(Self { n, edges: set })
    }

    pub fn empty(n: usize) -> Self {
        assert!(n > 0);
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub(crate) fn from_set(n: usize, edges: BTreeSet<Edge>) -> Self {
        debug_assert!(edges.iter().all(|&(u, v)| u < v && v < n));
        Self { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        edge(u, v).is_some_and(|e| self.edges.contains(&e))
    }

    /// Pairs `i < j` that are not edges, in pair-index order.
    pub fn non_edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(pair_count(self.n) - self.edges.len());
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if !self.edges.contains(&(i, j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Symmetric 0/1 adjacency matrix with zero diagonal.
    pub fn to_adjacency(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.n, self.n);
        for &(u, v) in &self.edges {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
        a
    }
}
