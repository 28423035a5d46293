//! Experiment files: what network to build and which tasks to run on it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gossipfield::generators::{generate, GraphRecipe};
use gossipfield::network::{NetworkSpec, NodeName};
use gossipfield::SocialNetwork;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub network: NetworkSource,
    /// Replaces the trust of every edge. Recipes default to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust: Option<f64>,
    /// Overrides the beliefs of existing stubborn agents, by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stubborn_beliefs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Relative to the spec file. `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    Inline(NetworkSpec),
    /// Network JSON file, relative to the spec file.
    File(PathBuf),
    Recipe(RecipeSource),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecipeSource {
    #[serde(flatten)]
    pub recipe: GraphRecipe,
    /// One belief per placed stubborn agent, in ascending id order.
    pub beliefs: Vec<f64>,
    /// Also write the generated graph as `graph.txt`.
    #[serde(default)]
    pub export_edges: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Initial {
    /// Every regular agent starts here.
    Uniform(f64),
    /// One value per agent in node order; stubborn entries must equal their beliefs.
    Vector(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    #[default]
    Backward,
    /// Coalescing walks; unit trust only.
    Dual,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Tree { s0: NodeName, s1: NodeName },
    /// Stubborn agents at the first and last node of a barbell.
    Barbell,
    Cayley {
        m: usize,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generators: Option<Vec<Vec<i64>>>,
        s0: NodeName,
        s1: NodeName,
    },
}

pub const DEFAULT_SAMPLE_TOL: f64 = 1e-9;
pub const DEFAULT_ORACLE_TOL: f64 = 1e-8;
pub const DEFAULT_EPS: [f64; 3] = [0.05, 0.1, 0.2];

fn one() -> usize {
    1
}

fn sample_tol() -> f64 {
    DEFAULT_SAMPLE_TOL
}

fn oracle_tol() -> f64 {
    DEFAULT_ORACLE_TOL
}

fn default_eps() -> Vec<f64> {
    DEFAULT_EPS.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Simulate {
        horizon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Initial>,
        #[serde(default)]
        event_log: bool,
    },
    Ergodic {
        horizon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Initial>,
        #[serde(default = "one")]
        replicas: usize,
        /// Off-diagonal pairs whose covariance is also tracked.
        #[serde(default)]
        pairs: Vec<(NodeName, NodeName)>,
    },
    StationarySample {
        samples: usize,
        #[serde(default)]
        method: SampleMethod,
        #[serde(default = "sample_tol")]
        tol: f64,
    },
    Moments {},
    SecondMoments {
        /// Every pair when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<Vec<(NodeName, NodeName)>>,
    },
    Fluidity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        time_tol: Option<f64>,
    },
    Concentration {
        #[serde(default = "default_eps")]
        eps: Vec<f64>,
        /// Also test the variances (unit trust only).
        #[serde(default)]
        variance: bool,
    },
    OracleCheck {
        oracle: OracleSpec,
        #[serde(default = "oracle_tol")]
        tolerance: f64,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate { .. } => "simulate",
            Task::Ergodic { .. } => "ergodic",
            Task::StationarySample { .. } => "stationary_sample",
            Task::Moments {} => "moments",
            Task::SecondMoments { .. } => "second_moments",
            Task::Fluidity { .. } => "fluidity",
            Task::Concentration { .. } => "concentration",
            Task::OracleCheck { .. } => "oracle_check",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Task::Simulate { .. } | Task::Ergodic { .. } | Task::StationarySample { .. }
        )
    }

    fn validate(&self) -> Result<(), String> {
        let positive = |what: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{what} must be positive and finite, got {x}"))
            }
        };
        match self {
            Task::Simulate { horizon, .. } => positive("horizon", *horizon),
            Task::Ergodic {
                horizon, replicas, ..
            } => {
                positive("horizon", *horizon)?;
                if *replicas == 0 {
                    return Err("replicas must be at least 1".into());
                }
                Ok(())
            }
            Task::StationarySample { samples, tol, .. } => {
                if *samples == 0 {
                    return Err("samples must be at least 1".into());
                }
                positive("tol", *tol)
            }
            Task::Fluidity { time_tol: Some(t) } => positive("time_tol", *t),
            Task::Concentration { eps, .. } => {
                if eps.is_empty() {
                    return Err("eps list is empty".into());
                }
                eps.iter().try_for_each(|&e| positive("eps", e))
            }
            Task::OracleCheck { tolerance, .. } => positive("tolerance", *tolerance),
            _ => Ok(()),
        }
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::new("cli.invalid_spec", e.to_string()))
    }

    /// Checks the task list, the seed and referenced files. `base` is the
    /// directory relative paths are resolved against.
    pub fn validate(&self, base: &Path) -> Result<(), Failure> {
        if self.tasks.is_empty() {
            return Err(Failure::new("cli.no_tasks", "the spec lists no tasks"));
        }
        if self.seed.is_none() {
            if let Some(t) = self.tasks.iter().find(|t| t.is_stochastic()) {
                return Err(Failure::new(
                    "cli.missing_seed",
                    format!("task `{}` is stochastic and the spec has no seed", t.name()),
                ));
            }
        }
        for (i, t) in self.tasks.iter().enumerate() {
            t.validate()
                .map_err(|m| Failure::new("cli.invalid_task", m).at_task(i))?;
        }
        if let NetworkSource::File(p) = &self.network {
            let path = base.join(p);
            if !path.is_file() {
                return Err(Failure::new(
                    "cli.missing_file",
                    format!("network file {} does not exist", path.display()),
                ));
            }
        }
        Ok(())
    }

    /// The network with trust and belief overrides applied, plus the
    /// generated edge list when the recipe asks for it.
    pub fn build_network(&self, base: &Path) -> Result<(SocialNetwork, Option<String>), Failure> {
        let (net, edges) = match &self.network {
            NetworkSource::Inline(spec) => (spec.build()?, None),
            NetworkSource::File(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Failure::new("cli.missing_file", format!("{}: {e}", path.display()))
                })?;
                (NetworkSpec::from_json(&text)?.build()?, None)
            }
            NetworkSource::Recipe(r) => {
                let g = generate(&r.recipe)?;
                let net = g.canonical(&r.beliefs, self.trust.unwrap_or(1.0))?;
                (net, r.export_edges.then(|| g.graph.to_edge_list()))
            }
        };
        let net = match self.trust {
            Some(t) if !matches!(self.network, NetworkSource::Recipe(_)) => net.with_trust(t)?,
            _ => net,
        };
        Ok((override_beliefs(net, &self.stubborn_beliefs)?, edges))
    }
}

fn override_beliefs(
    net: SocialNetwork,
    beliefs: &BTreeMap<String, f64>,
) -> Result<SocialNetwork, Failure> {
    if beliefs.is_empty() {
        return Ok(net);
    }
    let mut b: Vec<Option<f64>> = (0..net.n()).map(|v| net.belief(v)).collect();
    for (name, &x) in beliefs {
        let v = net.id(name)?;
        if b[v].is_none() {
            return Err(Failure::new(
                "cli.invalid_spec",
                format!("`{name}` is a regular agent; only stubborn beliefs can be set"),
            ));
        }
        b[v] = Some(x);
    }
    Ok(SocialNetwork::from_parts(
        net.names().to_vec(),
        b,
        net.edges().to_vec(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line4(tasks: &str) -> String {
        format!(
            r#"{{"network": {{"recipe": {{"family": "line", "n": 4,
                "placement": {{"strategy": "extremes"}}, "beliefs": [0, 1]}}}},
                "tasks": {tasks}}}"#
        )
    }

    #[test]
    fn recipe_source_builds_the_canonical_network() {
        let spec = ExperimentSpec::parse(&line4(r#"[{"task": "moments"}]"#)).unwrap();
        spec.validate(Path::new(".")).unwrap();
        let (net, edges) = spec.build_network(Path::new(".")).unwrap();
        assert_eq!(net.n(), 4);
        assert_eq!(net.stubborn(), &[0, 3]);
        assert!(net.has_unit_trust());
        assert!(edges.is_none());
    }

    #[test]
    fn empty_task_list_is_rejected() {
        for tasks in ["[]", "null"] {
            let text = line4(tasks).replace(r#""tasks": null"#, r#""seed": 1"#);
            let spec = ExperimentSpec::parse(&text).unwrap();
            assert_eq!(spec.validate(Path::new(".")).unwrap_err().code, "cli.no_tasks");
        }
    }

    #[test]
    fn stochastic_tasks_need_a_seed() {
        let spec =
            ExperimentSpec::parse(&line4(r#"[{"task": "ergodic", "horizon": 10}]"#)).unwrap();
        assert_eq!(spec.validate(Path::new(".")).unwrap_err().code, "cli.missing_seed");
    }

    #[test]
    fn unknown_fields_and_bad_parameters_fail() {
        let err = ExperimentSpec::parse(&line4(r#"[{"task": "moments", "x": 1}]"#)).unwrap_err();
        assert_eq!(err.code, "cli.invalid_spec");
        let spec = ExperimentSpec::parse(&line4(
            r#"[{"task": "concentration", "eps": [0.1, -1]}]"#,
        ))
        .unwrap();
        let err = spec.validate(Path::new(".")).unwrap_err();
        assert_eq!((err.code.as_str(), err.task), ("cli.invalid_task", Some(0)));
    }

    #[test]
    fn overrides_apply() {
        let text = r#"{"network": {"inline": {"undirected_edges": [[0, 1], [1, 2]],
            "stubborn": {"0": 0.0, "2": 1.0}}},
            "trust": 0.5, "stubborn_beliefs": {"2": 4.0}, "tasks": [{"task": "moments"}]}"#;
        let spec = ExperimentSpec::parse(text).unwrap();
        let (net, _) = spec.build_network(Path::new(".")).unwrap();
        assert_eq!(net.belief(2), Some(4.0));
        assert!(net.edges().iter().all(|e| e.trust == 0.5));

        let bad = text.replace(r#"{"2": 4.0}"#, r#"{"1": 4.0}"#);
        let spec = ExperimentSpec::parse(&bad).unwrap();
        assert!(spec.build_network(Path::new(".")).is_err());
    }

    #[test]
    fn missing_network_file_is_reported() {
        let text = r#"{"network": {"file": "nowhere.json"}, "tasks": [{"task": "moments"}]}"#;
        let spec = ExperimentSpec::parse(text).unwrap();
        assert_eq!(spec.validate(Path::new("/nonexistent")).unwrap_err().code, "cli.missing_file");
    }
}
