use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use super::{check_initial_state, BeliefState, Event, Observer};
use crate::error::{Error, Result};
use crate::network::SocialNetwork;
use crate::rng::{split, streams, SimRng};

/// Result of a forward run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub horizon: f64,
    /// State at the horizon; `events` is `N(horizon)`.
    pub state: BeliefState,
}

/// Event-driven sampler of the forward process.
///
/// All edge clocks are merged into one exponential clock of rate
/// `r = Σ r_av`; each ring picks an edge with probability `r_av / r`.
pub struct ForwardSimulator<'a> {
    net: &'a SocialNetwork,
    clock: Exp<f64>,
    pick: WeightedIndex<f64>,
}

impl<'a> ForwardSimulator<'a> {
    pub fn new(net: &'a SocialNetwork) -> Result<Self> {
        let rate = net.total_rate();
        if !(rate > 0.0) {
            return Err(Error::ZeroRate);
        }
        let clock = Exp::new(rate).map_err(|_| Error::ZeroRate)?;
        let pick =
            WeightedIndex::new(net.edges().iter().map(|e| e.rate)).map_err(|_| Error::ZeroRate)?;
        Ok(ForwardSimulator { net, clock, pick })
    }

    pub fn network(&self) -> &SocialNetwork {
        self.net
    }

    /// Runs from `state` up to absolute time `until`, then calls
    /// `Observer::finish`. The clock is memoryless, so runs may be chained.
    pub fn advance(
        &self,
        state: &mut BeliefState,
        until: f64,
        rng: &mut SimRng,
        observers: &mut [&mut dyn Observer],
    ) -> Result<()> {
        if !until.is_finite() || until < state.t {
            return Err(Error::InvalidHorizon(until));
        }
        let edges = self.net.edges();
        loop {
            let t = state.t + self.clock.sample(rng);
            if t > until {
                break;
            }
            let k = self.pick.sample(rng);
            let e = &edges[k];
            let new_belief = (1.0 - e.trust) * state.x[e.from] + e.trust * state.x[e.to];
            let event = Event {
                time: t,
                edge: k,
                agent: e.from,
                neighbor: e.to,
                new_belief,
            };
            for obs in observers.iter_mut() {
                obs.observe(&event, &state.x);
            }
            state.x[e.from] = new_belief;
            state.t = t;
            state.events += 1;
        }
        state.t = until;
        for obs in observers.iter_mut() {
            obs.finish(state);
        }
        Ok(())
    }

    pub fn run(
        &self,
        x0: &[f64],
        horizon: f64,
        rng: &mut SimRng,
        observers: &mut [&mut dyn Observer],
    ) -> Result<Trajectory> {
        check_initial_state(self.net, x0)?;
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        let mut state = BeliefState {
            t: 0.0,
            x: x0.to_vec(),
            events: 0,
        };
        self.advance(&mut state, horizon, rng, observers)?;
        Ok(Trajectory { horizon, state })
    }
}

/// Simulates the process on `[0, horizon]` from `x0` with the simulation
/// stream of `seed`.
pub fn simulate_forward(
    net: &SocialNetwork,
    x0: &[f64],
    horizon: f64,
    seed: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    let mut rng = split(seed, streams::SIMULATION);
    ForwardSimulator::new(net)?.run(x0, horizon, &mut rng, observers)
}
