//! Monte Carlo for the gossip process.
//!
//! [`simulate_forward`] runs the process itself. [`ergodic_moments`] time-averages
//! one long run. [`sample_stationary_backward`] and [`voter_dual_sample`] draw
//! from the stationary law directly, the former approximately for any trust,
//! the latter exactly when every trust parameter is 1.

mod backward;
mod dual;
mod ergodic;
mod forward;
mod observers;

pub use backward::{sample_stationary_backward, BackwardSampler, DEFAULT_EVENT_CAP};
pub use dual::{voter_dual_sample, VoterDual};
pub use ergodic::{ergodic_moments, ErgodicAccumulator, DEFAULT_BATCHES};
pub use forward::{simulate_forward, ForwardSimulator, Trajectory};
pub use observers::{BoundsObserver, EventLog, MinMaxObserver};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::SocialNetwork;
use crate::rng::{split, streams, SimRng};

/// State of the process at time `t` after `events` meetings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub t: f64,
    pub x: Vec<f64>,
    pub events: u64,
}

/// One belief update: `agent` met `neighbor` via edge number `edge`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub edge: usize,
    pub agent: usize,
    pub neighbor: usize,
    pub new_belief: f64,
}

/// Receives every event of a forward run before the update is applied.
pub trait Observer {
    fn observe(&mut self, event: &Event, before: &[f64]);

    /// Called once with the state at the horizon.
    fn finish(&mut self, _state: &BeliefState) {}
}

/// A draw from (an approximation of) the stationary belief law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarySample {
    pub x: Vec<f64>,
    /// Bound on `max_v |x_v - exact draw|`; zero for exact samplers.
    pub bound: f64,
    pub events: u64,
}

/// Checks `x0` against the network: length and stubborn coordinates.
pub fn check_initial_state(net: &SocialNetwork, x0: &[f64]) -> Result<()> {
    if x0.len() != net.n() {
        return Err(Error::StateLength {
            got: x0.len(),
            expected: net.n(),
        });
    }
    for &s in net.stubborn() {
        let expected = net.belief(s).unwrap();
        if x0[s] != expected {
            return Err(Error::StubbornMismatch {
                node: net.name(s).to_string(),
                got: x0[s],
                expected,
            });
        }
    }
    if let Some(v) = x0.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidBelief {
            node: net.name(v).to_string(),
            belief: x0[v],
        });
    }
    Ok(())
}

/// Initial state with every regular agent at `value`.
pub fn uniform_start(net: &SocialNetwork, value: f64) -> Vec<f64> {
    (0..net.n())
        .map(|v| net.belief(v).unwrap_or(value))
        .collect()
}

/// Runs `replicas` independent jobs in parallel. Replica `i` gets the
/// stream `split(seed, REPLICA_BASE + i)`; results come back in replica order.
pub fn ensemble<T, F>(replicas: usize, seed: u64, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, SimRng) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|i| job(i, split(seed, streams::REPLICA_BASE + i as u64)))
        .collect()
}
