//! JSON description of a network.
//!
//! Two shapes are accepted:
//!
//! ```json
//! {"nodes": ["a", "b", "s"], "stubborn": {"s": 1.0},
//!  "edges": [{"from": "a", "to": "s", "rate": 0.5, "trust": 0.5}, ...]}
//! ```
//!
//! and the canonical shorthand, expanded with rate `1/d_a`:
//!
//! ```json
//! {"undirected_edges": [[0, 1], [1, 2]], "stubborn": {"0": 0.0, "2": 1.0}, "trust": 0.5}
//! ```
//!
//! Node names may be strings or non-negative integers.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Edge, SocialNetwork};
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeName(pub String);

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for NodeName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for NodeName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Int(i) => NodeName(i.to_string()),
            Raw::Str(s) => NodeName(s),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: NodeName,
    pub to: NodeName,
    pub rate: f64,
    pub trust: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitNetworkSpec {
    pub nodes: Vec<NodeName>,
    pub stubborn: BTreeMap<String, f64>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalNetworkSpec {
    pub undirected_edges: Vec<(NodeName, NodeName)>,
    pub stubborn: BTreeMap<String, f64>,
    #[serde(default = "unit_trust")]
    pub trust: f64,
    /// Node order; defaults to numeric order when every name is an integer,
    /// otherwise order of first appearance in `undirected_edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<NodeName>>,
}

fn unit_trust() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSpec {
    Explicit(ExplicitNetworkSpec),
    Canonical(CanonicalNetworkSpec),
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn build(&self) -> Result<SocialNetwork> {
        match self {
            NetworkSpec::Explicit(s) => s.build(),
            NetworkSpec::Canonical(s) => s.build(),
        }
    }
}

fn check_stubborn(
    names: &[String],
    index: &HashMap<String, usize>,
    stubborn: &BTreeMap<String, f64>,
) -> Result<Vec<Option<f64>>> {
    let mut beliefs = vec![None; names.len()];
    for (name, &x) in stubborn {
        let &v = index
            .get(name)
            .ok_or_else(|| Error::UnknownNode(name.clone()))?;
        beliefs[v] = Some(x);
    }
    Ok(beliefs)
}

fn name_index(names: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if index.insert(n.clone(), i).is_some() {
            return Err(Error::DuplicateNode(n.clone()));
        }
    }
    Ok(index)
}

impl ExplicitNetworkSpec {
    pub fn build(&self) -> Result<SocialNetwork> {
        let names: Vec<String> = self.nodes.iter().map(|n| n.0.clone()).collect();
        let index = name_index(&names)?;
        let beliefs = check_stubborn(&names, &index, &self.stubborn)?;
        let lookup = |n: &NodeName| {
            index
                .get(&n.0)
                .copied()
                .ok_or_else(|| Error::UnknownNode(n.0.clone()))
        };
        let edges = self
            .edges
            .iter()
            .map(|e| {
                Ok(Edge {
                    from: lookup(&e.from)?,
                    to: lookup(&e.to)?,
                    rate: e.rate,
                    trust: e.trust,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SocialNetwork::from_parts(names, beliefs, edges)
    }
}

impl CanonicalNetworkSpec {
    pub fn node_order(&self) -> Vec<String> {
        if let Some(nodes) = &self.nodes {
            return nodes.iter().map(|n| n.0.clone()).collect();
        }
        let mut seen = Vec::new();
        let mut set = std::collections::HashSet::new();
        let all = self
            .undirected_edges
            .iter()
            .flat_map(|(u, v)| [u, v])
            .map(|n| &n.0)
            .chain(self.stubborn.keys());
        for name in all {
            if set.insert(name.clone()) {
                seen.push(name.clone());
            }
        }
        if seen.iter().all(|n| n.parse::<u64>().is_ok()) {
            seen.sort_by_key(|n| n.parse::<u64>().unwrap());
        }
        seen
    }

    pub fn build(&self) -> Result<SocialNetwork> {
        let names = self.node_order();
        let index = name_index(&names)?;
        let beliefs = check_stubborn(&names, &index, &self.stubborn)?;
        let lookup = |n: &NodeName| {
            index
                .get(&n.0)
                .copied()
                .ok_or_else(|| Error::UnknownNode(n.0.clone()))
        };
        let mut pairs = Vec::with_capacity(self.undirected_edges.len());
        for (u, v) in &self.undirected_edges {
            pairs.push((lookup(u)?, lookup(v)?));
        }
        let graph = UndirectedGraph::new(names.len(), pairs).map_err(|e| match e {
            Error::SelfLoop(i) => Error::SelfLoop(names[i.parse::<usize>().unwrap()].clone()),
            Error::ParallelEdge { from, to } => Error::ParallelEdge {
                from: names[from.parse::<usize>().unwrap()].clone(),
                to: names[to.parse::<usize>().unwrap()].clone(),
            },
            other => other,
        })?;
        let stubborn: Vec<(usize, f64)> = beliefs
            .iter()
            .enumerate()
            .filter_map(|(v, b)| b.map(|x| (v, x)))
            .collect();
        SocialNetwork::canonical_named(&graph, names, &stubborn, self.trust)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_shorthand_with_integer_names() {
        let spec = NetworkSpec::from_json(
            r#"{"undirected_edges": [[0, 1], [1, 2], [2, 3]], "stubborn": {"0": 0.0, "3": 1.0}, "trust": 0.5}"#,
        )
        .unwrap();
        assert!(matches!(spec, NetworkSpec::Canonical(_)));
        let net = spec.build().unwrap();
        assert_eq!(net.n(), 4);
        assert_eq!(net.name(2), "2");
        assert_eq!(net.edge(1, 0).unwrap().rate, 0.5);
        assert_eq!(net.edge(1, 0).unwrap().trust, 0.5);
    }

    #[test]
    fn explicit_round_trip() {
        let text = r#"{"nodes": ["a", "s", "t"], "stubborn": {"s": 0.0, "t": 1.0},
            "edges": [{"from": "a", "to": "s", "rate": 0.5, "trust": 0.5},
                      {"from": "a", "to": "t", "rate": 0.5, "trust": 0.5}]}"#;
        let net = NetworkSpec::from_json(text).unwrap().build().unwrap();
        assert_eq!(net.regular(), &[0]);
        let json = serde_json::to_string(&net.to_spec()).unwrap();
        let again = NetworkSpec::from_json(&json).unwrap().build().unwrap();
        assert_eq!(again.edges(), net.edges());
        assert_eq!(again.stubborn_beliefs(), net.stubborn_beliefs());
    }

    #[test]
    fn unknown_names_rejected() {
        let text = r#"{"nodes": ["a", "s"], "stubborn": {"z": 0.0}, "edges": []}"#;
        assert!(matches!(
            NetworkSpec::from_json(text).unwrap().build(),
            Err(Error::UnknownNode(_))
        ));
        let text = r#"{"nodes": ["a", "s"], "stubborn": {"s": 0.0},
            "edges": [{"from": "a", "to": "q", "rate": 1, "trust": 1}]}"#;
        assert!(matches!(
            NetworkSpec::from_json(text).unwrap().build(),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn malformed_json_is_spec_error() {
        assert!(matches!(
            NetworkSpec::from_json(r#"{"nodes": 3}"#),
            Err(Error::InvalidSpec(_))
        ));
    }
}
