use std::io::Write;

use super::{BeliefState, Event, Observer};
use crate::error::Result;
use crate::network::SocialNetwork;

/// Per-agent running minimum and maximum of the belief, including the start.
#[derive(Clone, Debug)]
pub struct MinMaxObserver {
    min: Vec<f64>,
    max: Vec<f64>,
    started: bool,
}

impl MinMaxObserver {
    pub fn new(n: usize) -> Self {
        MinMaxObserver {
            min: vec![f64::INFINITY; n],
            max: vec![f64::NEG_INFINITY; n],
            started: false,
        }
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    fn absorb(&mut self, x: &[f64]) {
        for (v, &xv) in x.iter().enumerate() {
            self.min[v] = self.min[v].min(xv);
            self.max[v] = self.max[v].max(xv);
        }
    }
}

impl Observer for MinMaxObserver {
    fn observe(&mut self, event: &Event, before: &[f64]) {
        if !self.started {
            self.absorb(before);
            self.started = true;
        }
        let a = event.agent;
        self.min[a] = self.min[a].min(event.new_belief);
        self.max[a] = self.max[a].max(event.new_belief);
    }

    fn finish(&mut self, state: &BeliefState) {
        self.absorb(&state.x);
    }
}

/// Counts updates that leave the stubborn-belief hull.
#[derive(Clone, Debug)]
pub struct BoundsObserver {
    lo: f64,
    hi: f64,
    checked: u64,
    violations: u64,
}

impl BoundsObserver {
    /// Slack allowed for rounding in the convex combination.
    pub const TOL: f64 = 1e-12;

    pub fn new(net: &SocialNetwork) -> Self {
        let (lo, hi) = net.belief_hull();
        let slack = Self::TOL * (1.0 + lo.abs().max(hi.abs()));
        BoundsObserver {
            lo: lo - slack,
            hi: hi + slack,
            checked: 0,
            violations: 0,
        }
    }

    pub fn checked(&self) -> u64 {
        self.checked
    }

    pub fn violations(&self) -> u64 {
        self.violations
    }
}

impl Observer for BoundsObserver {
    fn observe(&mut self, event: &Event, _before: &[f64]) {
        self.checked += 1;
        if event.new_belief < self.lo || event.new_belief > self.hi {
            self.violations += 1;
        }
    }
}

/// Records every event.
#[derive(Clone, Debug, Default)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// CSV with header `time,edge,agent,neighbor,new_belief`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,edge,agent,neighbor,new_belief")?;
        for e in &self.events {
            writeln!(
                out,
                "{:.17e},{},{},{},{:.17e}",
                e.time, e.edge, e.agent, e.neighbor, e.new_belief
            )?;
        }
        Ok(())
    }
}

impl Observer for EventLog {
    fn observe(&mut self, event: &Event, _before: &[f64]) {
        self.events.push(*event);
    }
}
