use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{ensemble, StationarySample};
use crate::error::{Error, Result};
use crate::moments::require_unit_trust;
use crate::network::SocialNetwork;
use crate::rng::{split, streams, SimRng};

/// Exact stationary sampler for the voter case (all trust parameters 1).
///
/// One walker starts at every regular agent and moves with generator `Q`.
/// Walkers that meet merge. A walker absorbed at stubborn `s` hands `x_s` to
/// every agent it carries. Only the order of jumps matters, so the embedded
/// jump chain is sampled: the next walker to move is picked with probability
/// proportional to its rate by rejection against the largest rate.
pub struct VoterDual<'a> {
    net: &'a SocialNetwork,
    rate: Vec<f64>,
    max_rate: f64,
    jumps: Vec<Option<WeightedIndex<f64>>>,
    targets: Vec<Vec<usize>>,
}

impl<'a> VoterDual<'a> {
    pub fn new(net: &'a SocialNetwork) -> Result<Self> {
        require_unit_trust(net)?;
        let n = net.n();
        let mut rate = vec![0.0; n];
        let mut jumps = vec![None; n];
        let mut targets = vec![Vec::new(); n];
        for &a in net.regular() {
            let out = net.out_edges(a);
            rate[a] = out.iter().map(|e| e.rate).sum();
            targets[a] = out.iter().map(|e| e.to).collect();
            jumps[a] =
                Some(WeightedIndex::new(out.iter().map(|e| e.rate)).map_err(|_| Error::ZeroRate)?);
        }
        let max_rate = rate.iter().copied().fold(0.0, f64::max);
        Ok(VoterDual {
            net,
            rate,
            max_rate,
            jumps,
            targets,
        })
    }

    pub fn sample(&self, rng: &mut SimRng) -> StationarySample {
        let net = self.net;
        let n = net.n();
        let mut x: Vec<f64> = (0..n).map(|v| net.belief(v).unwrap_or(f64::NAN)).collect();
        let mut at: Vec<usize> = net.regular().to_vec();
        let mut carried: Vec<Vec<usize>> = at.iter().map(|&a| vec![a]).collect();
        let mut slot: Vec<Option<usize>> = vec![None; n];
        for (i, &a) in at.iter().enumerate() {
            slot[a] = Some(i);
        }
        let mut events = 0u64;
        while !at.is_empty() {
            let i = rng.random_range(0..at.len());
            let v = at[i];
            if self.rate[v] < self.max_rate && rng.random::<f64>() * self.max_rate >= self.rate[v] {
                continue;
            }
            events += 1;
            let w = self.targets[v][self.jumps[v].as_ref().unwrap().sample(rng)];
            slot[v] = None;
            if let Some(b) = net.belief(w) {
                carried[i].iter().for_each(|&a| x[a] = b);
                remove(&mut at, &mut carried, &mut slot, i);
            } else if let Some(j) = slot[w] {
                let mut moved = std::mem::take(&mut carried[i]);
                if moved.len() > carried[j].len() {
                    std::mem::swap(&mut moved, &mut carried[j]);
                }
                carried[j].extend(moved);
                remove(&mut at, &mut carried, &mut slot, i);
            } else {
                at[i] = w;
                slot[w] = Some(i);
            }
        }
        StationarySample {
            x,
            bound: 0.0,
            events,
        }
    }

    /// `count` independent draws, computed in parallel, one stream per draw.
    pub fn sample_many(&self, count: usize, seed: u64) -> Vec<StationarySample> {
        ensemble(count, seed, |_, mut rng| self.sample(&mut rng))
    }
}

fn remove(
    at: &mut Vec<usize>,
    carried: &mut Vec<Vec<usize>>,
    slot: &mut [Option<usize>],
    i: usize,
) {
    at.swap_remove(i);
    carried.swap_remove(i);
    if i < at.len() {
        slot[at[i]] = Some(i);
    }
}

/// One exact stationary draw with the simulation stream of `seed`.
pub fn voter_dual_sample(net: &SocialNetwork, seed: u64) -> Result<StationarySample> {
    Ok(VoterDual::new(net)?.sample(&mut split(seed, streams::SIMULATION)))
}
