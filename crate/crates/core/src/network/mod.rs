//! Social networks: agents, stubborn beliefs, directed meeting edges with
//! rates and trust, plus the matrices derived from them.
//!
//! A [`SocialNetwork`] is immutable once built. Construction checks the
//! structural rules (no self-loops or parallel edges, only regular agents
//! have outgoing edges, positive rates, trust in `(0, 1]`) and that every
//! regular agent can reach at least one stubborn agent.

mod matrices;
mod reversible;
mod spec;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::OnceLock;

pub use matrices::{CoupledK, GeneratorQ, JumpP, MaterializedK};
pub use reversible::{ReversibleExtension, DETAILED_BALANCE_TOL};
pub use spec::{CanonicalNetworkSpec, EdgeSpec, ExplicitNetworkSpec, NetworkSpec, NodeName};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;

/// Absolute tolerance of the structural invariant checks.
pub const STRUCTURAL_TOL: f64 = 1e-10;

/// A directed meeting edge: when its clock rings, `from` moves towards `to`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Poisson meeting rate, events per unit time.
    pub rate: f64,
    /// Weight put on the met agent's belief.
    pub trust: f64,
}

#[derive(Clone, Debug)]
pub struct SocialNetwork {
    names: Vec<String>,
    index: HashMap<String, usize>,
    beliefs: Vec<Option<f64>>,
    regular: Vec<usize>,
    stubborn: Vec<usize>,
    /// Position of each node inside `regular` or `stubborn`.
    local: Vec<usize>,
    /// Sorted by `(from, to)`.
    edges: Vec<Edge>,
    out_start: Vec<usize>,
    influence: Vec<Vec<usize>>,
    q: OnceLock<GeneratorQ>,
    p: OnceLock<JumpP>,
}

/// Incremental construction of a [`SocialNetwork`] by node name.
#[derive(Clone, Debug, Default)]
pub struct NetworkBuilder {
    names: Vec<String>,
    index: HashMap<String, usize>,
    beliefs: Vec<Option<f64>>,
    edges: Vec<Edge>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn add(&mut self, name: &str, belief: Option<f64>) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateNode(name.to_string()));
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.beliefs.push(belief);
        Ok(id)
    }

    pub fn regular(&mut self, name: &str) -> Result<usize> {
        self.add(name, None)
    }

    pub fn stubborn(&mut self, name: &str, belief: f64) -> Result<usize> {
        self.add(name, Some(belief))
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn edge(&mut self, from: &str, to: &str, rate: f64, trust: f64) -> Result<&mut Self> {
        let (from, to) = (self.id(from)?, self.id(to)?);
        Ok(self.edge_ids(from, to, rate, trust))
    }

    pub fn edge_ids(&mut self, from: usize, to: usize, rate: f64, trust: f64) -> &mut Self {
        self.edges.push(Edge {
            from,
            to,
            rate,
            trust,
        });
        self
    }

    pub fn build(self) -> Result<SocialNetwork> {
        SocialNetwork::from_parts(self.names, self.beliefs, self.edges)
    }
}

impl SocialNetwork {
    /// Validates and assembles a network. `beliefs[v]` is `Some(x_v)` exactly
    /// for stubborn agents.
    pub fn from_parts(
        names: Vec<String>,
        beliefs: Vec<Option<f64>>,
        mut edges: Vec<Edge>,
    ) -> Result<Self> {
        assert_eq!(names.len(), beliefs.len());
        let n = names.len();
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::DuplicateNode(name.clone()));
            }
        }
        for (v, b) in beliefs.iter().enumerate() {
            if let Some(x) = b {
                if !x.is_finite() {
                    return Err(Error::InvalidBelief {
                        node: names[v].clone(),
                        belief: *x,
                    });
                }
            }
        }
        let name = |v: usize| names[v].clone();
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::UnknownNode(format!("#{}", e.from.max(e.to))));
            }
            if e.from == e.to {
                return Err(Error::SelfLoop(name(e.from)));
            }
            if beliefs[e.from].is_some() {
                return Err(Error::StubbornSource(name(e.from)));
            }
            if !(e.rate.is_finite() && e.rate > 0.0) {
                return Err(Error::InvalidRate {
                    from: name(e.from),
                    to: name(e.to),
                    rate: e.rate,
                });
            }
            if !(e.trust > 0.0 && e.trust <= 1.0) {
                return Err(Error::InvalidTrust {
                    from: name(e.from),
                    to: name(e.to),
                    trust: e.trust,
                });
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        for w in edges.windows(2) {
            if (w[0].from, w[0].to) == (w[1].from, w[1].to) {
                return Err(Error::ParallelEdge {
                    from: name(w[0].from),
                    to: name(w[0].to),
                });
            }
        }

        let regular: Vec<usize> = (0..n).filter(|&v| beliefs[v].is_none()).collect();
        let stubborn: Vec<usize> = (0..n).filter(|&v| beliefs[v].is_some()).collect();
        if regular.is_empty() {
            return Err(Error::NoRegularAgents);
        }
        if stubborn.is_empty() {
            return Err(Error::NoStubbornAgents);
        }
        let mut local = vec![0; n];
        for (i, &a) in regular.iter().enumerate() {
            local[a] = i;
        }
        for (i, &s) in stubborn.iter().enumerate() {
            local[s] = i;
        }
        let mut out_start = vec![0; n + 1];
        for e in &edges {
            out_start[e.from + 1] += 1;
        }
        for v in 0..n {
            out_start[v + 1] += out_start[v];
        }
        for &a in &regular {
            if out_start[a] == out_start[a + 1] {
                return Err(Error::NoOutEdges(name(a)));
            }
        }

        let mut net = SocialNetwork {
            names,
            index,
            beliefs,
            regular,
            stubborn,
            local,
            edges,
            out_start,
            influence: Vec::new(),
            q: OnceLock::new(),
            p: OnceLock::new(),
        };
        net.influence = net.compute_influence();
        if let Some(&a) = net.regular.iter().find(|&&a| net.influence[a].is_empty()) {
            return Err(Error::Uninfluenced(net.names[a].clone()));
        }
        Ok(net)
    }

    /// Canonical construction from an undirected graph: regular–regular
    /// edges become bidirectional, regular–stubborn edges point into the
    /// stubborn agent, every edge out of `a` has rate `1/d_a` and trust
    /// `trust`.
    pub fn canonical(
        graph: &UndirectedGraph,
        stubborn: &[(usize, f64)],
        trust: f64,
    ) -> Result<Self> {
        let names = (0..graph.n()).map(|v| v.to_string()).collect();
        Self::canonical_named(graph, names, stubborn, trust)
    }

    pub fn canonical_named(
        graph: &UndirectedGraph,
        names: Vec<String>,
        stubborn: &[(usize, f64)],
        trust: f64,
    ) -> Result<Self> {
        let n = graph.n();
        assert_eq!(names.len(), n);
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        if !(trust > 0.0 && trust <= 1.0) {
            return Err(Error::InvalidTrust {
                from: "*".into(),
                to: "*".into(),
                trust,
            });
        }
        let mut beliefs = vec![None; n];
        for &(s, x) in stubborn {
            if s >= n {
                return Err(Error::UnknownNode(s.to_string()));
            }
            if beliefs[s].replace(x).is_some() {
                return Err(Error::DuplicateNode(names[s].clone()));
            }
        }
        let mut edges = Vec::with_capacity(2 * graph.edges().len());
        for a in 0..n {
            if beliefs[a].is_some() {
                continue;
            }
            let rate = 1.0 / graph.degree(a) as f64;
            for &v in graph.neighbors(a) {
                edges.push(Edge {
                    from: a,
                    to: v,
                    rate,
                    trust,
                });
            }
        }
        Self::from_parts(names, beliefs, edges)
    }

    /// Same topology, rates and trust with stubborn beliefs mapped by `f`.
    pub fn map_beliefs(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let beliefs = self.beliefs.iter().map(|b| b.map(&f)).collect();
        Self::from_parts(self.names.clone(), beliefs, self.edges.clone())
    }

    /// Same network with every edge's trust replaced.
    pub fn with_trust(&self, trust: f64) -> Result<Self> {
        let edges = self.edges.iter().map(|e| Edge { trust, ..*e }).collect();
        Self::from_parts(self.names.clone(), self.beliefs.clone(), edges)
    }

    fn compute_influence(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &self.edges {
            incoming[e.to].push(e.from);
        }
        let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for &s in &self.stubborn {
            seen.iter_mut().for_each(|x| *x = false);
            seen[s] = true;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &a in &incoming[u] {
                    if !seen[a] {
                        seen[a] = true;
                        sets[a].push(s);
                        queue.push_back(a);
                    }
                }
            }
        }
        sets
    }

    /// For every regular agent, the stubborn agents it reaches by a directed
    /// path. Never empty on a constructed network.
    pub fn validate_influence(&self) -> Result<BTreeMap<usize, BTreeSet<usize>>> {
        let mut out = BTreeMap::new();
        for &a in &self.regular {
            let set: BTreeSet<usize> = self.influence[a].iter().copied().collect();
            if set.is_empty() {
                return Err(Error::Uninfluenced(self.names[a].clone()));
            }
            out.insert(a, set);
        }
        Ok(out)
    }

    /// Stubborn agents influencing `v` (for a stubborn `v`, just itself).
    pub fn influence_set(&self, v: usize) -> Vec<usize> {
        if self.is_stubborn(v) {
            vec![v]
        } else {
            self.influence[v].clone()
        }
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn is_stubborn(&self, v: usize) -> bool {
        self.beliefs[v].is_some()
    }

    pub fn belief(&self, v: usize) -> Option<f64> {
        self.beliefs[v]
    }

    pub fn regular(&self) -> &[usize] {
        &self.regular
    }

    pub fn stubborn(&self) -> &[usize] {
        &self.stubborn
    }

    /// Position of `v` within [`regular`](Self::regular) or [`stubborn`](Self::stubborn).
    pub fn local_index(&self, v: usize) -> usize {
        self.local[v]
    }

    /// Stubborn beliefs in [`stubborn`](Self::stubborn) order.
    pub fn stubborn_beliefs(&self) -> Vec<f64> {
        self.stubborn
            .iter()
            .map(|&s| self.beliefs[s].unwrap())
            .collect()
    }

    /// `(min_s x_s, max_s x_s)`.
    pub fn belief_hull(&self) -> (f64, f64) {
        self.stubborn_beliefs()
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: usize) -> &[Edge] {
        &self.edges[self.out_start[v]..self.out_start[v + 1]]
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        let out = self.out_edges(from);
        out.binary_search_by_key(&to, |e| e.to)
            .ok()
            .map(|k| &out[k])
    }

    /// `r_v`, the total meeting rate of agent `v`.
    pub fn agent_rate(&self, v: usize) -> f64 {
        self.out_edges(v).iter().map(|e| e.rate).sum()
    }

    /// `r`, the total meeting rate of all agents.
    pub fn total_rate(&self) -> f64 {
        self.edges.iter().map(|e| e.rate).sum()
    }

    pub fn has_unit_trust(&self) -> bool {
        self.edges.iter().all(|e| e.trust == 1.0)
    }

    /// First edge whose trust differs from 1, if any.
    pub fn non_unit_trust_edge(&self) -> Option<&Edge> {
        self.edges.iter().find(|e| e.trust != 1.0)
    }

    pub fn generator_q(&self) -> &GeneratorQ {
        self.q.get_or_init(|| GeneratorQ::new(self))
    }

    pub fn jump_p(&self) -> &JumpP {
        self.p.get_or_init(|| JumpP::new(self))
    }

    pub fn coupled_k(&self) -> CoupledK {
        CoupledK::new(self)
    }

    pub fn reversible_extension(&self) -> Result<ReversibleExtension> {
        ReversibleExtension::new(self)
    }

    /// Underlying undirected graph of the edge set.
    pub fn undirected(&self) -> UndirectedGraph {
        UndirectedGraph::simplify(self.n(), self.edges.iter().map(|e| (e.from, e.to))).0
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec::Explicit(ExplicitNetworkSpec {
            nodes: self.names.iter().cloned().map(NodeName).collect(),
            stubborn: self
                .stubborn
                .iter()
                .map(|&s| (self.names[s].clone(), self.beliefs[s].unwrap()))
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    from: NodeName(self.names[e.from].clone()),
                    to: NodeName(self.names[e.to].clone()),
                    rate: e.rate,
                    trust: e.trust,
                })
                .collect(),
        })
    }
}
