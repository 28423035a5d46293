use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::{ensemble, StationarySample};
use crate::error::{Error, Result};
use crate::network::SocialNetwork;
use crate::rng::{split, streams, SimRng};

/// Default maximum number of events per backward draw.
pub const DEFAULT_EVENT_CAP: u64 = 10_000_000;

/// Draws from the stationary law by composing random updates backwards in time.
///
/// With i.i.d. updates `X ← A(k) X + B(k)`, the sum `Σ_k A(1)…A(k-1) B(k)`
/// converges almost surely and has the stationary law. The running prefix
/// product `M = A(1)…A(k)` is kept densely on the regular agents. It is
/// non-negative and every row sums to at most one, so the remaining tail
/// is bounded by `max_r Σ_c M_rc · max_s |x_s|`.
pub struct BackwardSampler<'a> {
    net: &'a SocialNetwork,
    pick: WeightedIndex<f64>,
    scale: f64,
    cap: u64,
}

impl<'a> BackwardSampler<'a> {
    pub fn new(net: &'a SocialNetwork) -> Result<Self> {
        let pick =
            WeightedIndex::new(net.edges().iter().map(|e| e.rate)).map_err(|_| Error::ZeroRate)?;
        let scale = net
            .stubborn_beliefs()
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(BackwardSampler {
            net,
            pick,
            scale,
            cap: DEFAULT_EVENT_CAP,
        })
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    /// One draw whose distance to an exact stationary draw is at most `tol`
    /// in every coordinate.
    pub fn sample(&self, tol: f64, rng: &mut SimRng) -> Result<StationarySample> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let net = self.net;
        let regular = net.regular();
        let na = regular.len();
        let edges = net.edges();
        // column-major: column c is m[c * na .. (c + 1) * na]
        let mut m = vec![0.0; na * na];
        (0..na).for_each(|i| m[i * na + i] = 1.0);
        let mut row_sum = vec![1.0; na];
        let mut y = vec![0.0; na];
        let mut events = 0u64;
        let mut bound = self.scale;
        while bound >= tol {
            if events == self.cap {
                return Err(Error::TailBoundNotReached { bound, events });
            }
            events += 1;
            let e = &edges[self.pick.sample(rng)];
            let a = net.local_index(e.from);
            let theta = e.trust;
            match net.belief(e.to) {
                None => {
                    let v = net.local_index(e.to);
                    let (ca, cv) = two_columns(&mut m, na, a, v);
                    for (xa, xv) in ca.iter_mut().zip(cv.iter_mut()) {
                        *xv += theta * *xa;
                        *xa *= 1.0 - theta;
                    }
                }
                Some(x) => {
                    let ca = &mut m[a * na..(a + 1) * na];
                    for r in 0..na {
                        y[r] += theta * x * ca[r];
                        row_sum[r] -= theta * ca[r];
                        ca[r] *= 1.0 - theta;
                    }
                    bound = row_sum.iter().fold(0.0f64, |b, s| b.max(*s)) * self.scale;
                    if bound < tol {
                        // confirm against exact row sums before stopping
                        for (r, s) in row_sum.iter_mut().enumerate() {
                            *s = (0..na).map(|c| m[c * na + r]).sum();
                        }
                        bound = row_sum.iter().fold(0.0f64, |b, s| b.max(*s)) * self.scale;
                    }
                }
            }
        }
        let mut x = vec![0.0; net.n()];
        for v in 0..net.n() {
            x[v] = net.belief(v).unwrap_or_else(|| y[net.local_index(v)]);
        }
        Ok(StationarySample { x, bound, events })
    }

    /// `count` independent draws, computed in parallel, one stream per draw.
    pub fn sample_many(&self, count: usize, tol: f64, seed: u64) -> Result<Vec<StationarySample>> {
        ensemble(count, seed, |_, mut rng| self.sample(tol, &mut rng))
            .into_iter()
            .collect()
    }
}

fn two_columns(m: &mut [f64], na: usize, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert_ne!(a, b);
    if a < b {
        let (lo, hi) = m.split_at_mut(b * na);
        (&mut lo[a * na..(a + 1) * na], &mut hi[..na])
    } else {
        let (lo, hi) = m.split_at_mut(a * na);
        (&mut hi[..na], &mut lo[b * na..(b + 1) * na])
    }
}

/// One backward draw with the simulation stream of `seed`.
pub fn sample_stationary_backward(
    net: &SocialNetwork,
    tol: f64,
    seed: u64,
) -> Result<StationarySample> {
    BackwardSampler::new(net)?.sample(tol, &mut split(seed, streams::SIMULATION))
}
