//! Simple undirected graphs on dense node ids `0..n`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct UndirectedGraph {
    n: usize,
    /// Sorted, each pair stored as `(u, v)` with `u < v`.
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawGraph> for UndirectedGraph {
    type Error = Error;
    fn try_from(raw: RawGraph) -> Result<Self> {
        UndirectedGraph::new(raw.n, raw.edges)
    }
}

impl From<UndirectedGraph> for RawGraph {
    fn from(g: UndirectedGraph) -> Self {
        RawGraph {
            n: g.n,
            edges: g.edges,
        }
    }
}

/// What [`UndirectedGraph::simplify`] had to discard.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplifyStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl UndirectedGraph {
    /// Strict constructor: rejects self-loops, repeated edges and ids `>= n`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidRecipe(format!(
                    "edge ({u},{v}) out of range for n = {n}"
                )));
            }
            if u == v {
                return Err(Error::SelfLoop(u.to_string()));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::ParallelEdge {
                    from: u.to_string(),
                    to: v.to_string(),
                });
            }
        }
        Ok(Self::from_set(n, set))
    }

    /// Lenient constructor used by multigraph generators: drops self-loops
    /// and collapses repeated edges.
    pub fn simplify(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> (Self, SimplifyStats) {
        let mut stats = SimplifyStats::default();
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            assert!(u < n && v < n, "edge ({u},{v}) out of range");
            if u == v {
                stats.self_loops += 1;
            } else if !set.insert((u.min(v), u.max(v))) {
                stats.duplicates += 1;
            }
        }
        (Self::from_set(n, set), stats)
    }

    fn from_set(n: usize, set: BTreeSet<(usize, usize)>) -> Self {
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        UndirectedGraph { n, edges, adj }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn distances(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &w in &self.adj[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.distances(0).iter().all(Option::is_some)
    }

    pub fn is_tree(&self) -> bool {
        self.n > 0 && self.edges.len() == self.n - 1 && self.is_connected()
    }

    /// One `u v` pair per line, ascending.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 8);
        for &(u, v) in &self.edges {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }
}
