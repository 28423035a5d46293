use std::collections::HashMap;

use super::{check_initial_state, simulate_forward, BeliefState, Event, Observer};
use crate::error::{Error, Result};
use crate::network::SocialNetwork;

/// Number of equal-length batches a run is cut into for standard errors.
pub const DEFAULT_BATCHES: usize = 100;

#[derive(Clone, Debug)]
struct Batch {
    len: f64,
    /// Time-averages of `X_v` over the batch.
    first: Vec<f64>,
    /// Time-averages of `X_v X_w` for each requested pair.
    second: Vec<f64>,
}

/// Exact time integrals of `X_v` and of `X_v X_w` for requested pairs.
///
/// Beliefs are piecewise constant, so integrals are updated lazily only for
/// the agent that moves. Standard errors come from batch means; accumulators
/// of independent runs combine with [`merge`](Self::merge).
#[derive(Clone, Debug)]
pub struct ErgodicAccumulator {
    pairs: Vec<(usize, usize)>,
    pair_index: HashMap<(usize, usize), usize>,
    elapsed: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    batches: Vec<Batch>,
    live: Option<Live>,
}

/// Bookkeeping of a run in progress.
#[derive(Clone, Debug)]
struct Live {
    x: Vec<f64>,
    last: Vec<f64>,
    pair_last: Vec<f64>,
    pairs_of: Vec<Vec<usize>>,
    start: f64,
    end: f64,
    batch_len: f64,
    boundaries: usize,
    next: usize,
    snap_first: Vec<f64>,
    snap_second: Vec<f64>,
}

impl ErgodicAccumulator {
    /// Accumulator for a run on `[t0, t0 + horizon]` started at `x0`.
    pub fn new(
        x0: &[f64],
        t0: f64,
        horizon: f64,
        pairs: &[(usize, usize)],
        batches: usize,
    ) -> Result<Self> {
        let n = x0.len();
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        if batches < 2 {
            return Err(Error::InvalidArgument("need at least two batches".into()));
        }
        if let Some(&(v, w)) = pairs.iter().find(|&&(v, w)| v >= n || w >= n) {
            return Err(Error::InvalidArgument(format!(
                "pair ({v}, {w}) out of range"
            )));
        }
        let mut pairs_of = vec![Vec::new(); n];
        for (k, &(v, w)) in pairs.iter().enumerate() {
            pairs_of[v].push(k);
            if w != v {
                pairs_of[w].push(k);
            }
        }
        let live = Live {
            x: x0.to_vec(),
            last: vec![t0; n],
            pair_last: vec![t0; pairs.len()],
            pairs_of,
            start: t0,
            end: t0 + horizon,
            batch_len: horizon / batches as f64,
            boundaries: batches,
            next: 1,
            snap_first: vec![0.0; n],
            snap_second: vec![0.0; pairs.len()],
        };
        Ok(ErgodicAccumulator {
            pairs: pairs.to_vec(),
            pair_index: index_pairs(pairs),
            elapsed: 0.0,
            first: vec![0.0; n],
            second: vec![0.0; pairs.len()],
            batches: Vec::with_capacity(batches),
            live: Some(live),
        })
    }

    pub fn n(&self) -> usize {
        self.first.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Total integrated time.
    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    /// Time-average of `X_v`.
    pub fn mean(&self, v: usize) -> f64 {
        self.first[v] / self.elapsed
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.n()).map(|v| self.mean(v)).collect()
    }

    /// Time-average of `X_v X_w`, if the pair was requested.
    pub fn second_moment(&self, v: usize, w: usize) -> Option<f64> {
        self.pair(v, w).map(|k| self.second[k] / self.elapsed)
    }

    pub fn covariance(&self, v: usize, w: usize) -> Option<f64> {
        self.second_moment(v, w)
            .map(|m2| m2 - self.mean(v) * self.mean(w))
    }

    pub fn variance(&self, v: usize) -> Option<f64> {
        self.covariance(v, v)
    }

    /// Batch-means standard error of [`mean`](Self::mean).
    pub fn mean_se(&self, v: usize) -> f64 {
        self.standard_error(|b| b.first[v])
    }

    /// Batch standard error of the covariance estimate: the delta-method
    /// term plus a bound on the second-order term `Var(ε_v ε_w)`, which
    /// dominates when the means are near zero.
    pub fn covariance_se(&self, v: usize, w: usize) -> Option<f64> {
        let k = self.pair(v, w)?;
        let (mv, mw) = (self.mean(v), self.mean(w));
        let delta = self.standard_error(|b| b.second[k] - mw * b.first[v] - mv * b.first[w]);
        let product = self.mean_se(v) * self.mean_se(w);
        Some((delta * delta + 2.0 * product * product).sqrt())
    }

    pub fn variance_se(&self, v: usize) -> Option<f64> {
        self.covariance_se(v, v)
    }

    /// Folds in an independent run with the same agents and pairs.
    pub fn merge(&mut self, other: &ErgodicAccumulator) -> Result<()> {
        if self.live.is_some() || other.live.is_some() {
            return Err(Error::InvalidArgument(
                "cannot merge an unfinished accumulator".into(),
            ));
        }
        if self.n() != other.n() || self.pairs != other.pairs {
            return Err(Error::InvalidArgument(
                "accumulators track different quantities".into(),
            ));
        }
        self.elapsed += other.elapsed;
        self.first
            .iter_mut()
            .zip(&other.first)
            .for_each(|(a, b)| *a += b);
        self.second
            .iter_mut()
            .zip(&other.second)
            .for_each(|(a, b)| *a += b);
        self.batches.extend(other.batches.iter().cloned());
        Ok(())
    }

    fn pair(&self, v: usize, w: usize) -> Option<usize> {
        self.pair_index
            .get(&(v, w))
            .or_else(|| self.pair_index.get(&(w, v)))
            .copied()
    }

    /// Standard error of a length-weighted mean of batch statistics `f`.
    fn standard_error(&self, f: impl Fn(&Batch) -> f64) -> f64 {
        let b = self.batches.len();
        if b < 2 {
            return f64::NAN;
        }
        let total: f64 = self.batches.iter().map(|x| x.len).sum();
        let center = self.batches.iter().map(|x| x.len * f(x)).sum::<f64>() / total;
        let ss: f64 = self
            .batches
            .iter()
            .map(|x| (x.len * (f(x) - center)).powi(2))
            .sum();
        (ss / (total * total) * b as f64 / (b - 1) as f64).sqrt()
    }

    /// Integrates every agent and pair up to `t`.
    fn flush_all(&mut self, t: f64) {
        let live = self.live.as_mut().unwrap();
        for v in 0..live.x.len() {
            self.first[v] += live.x[v] * (t - live.last[v]);
            live.last[v] = t;
        }
        for (k, &(v, w)) in self.pairs.iter().enumerate() {
            self.second[k] += live.x[v] * live.x[w] * (t - live.pair_last[k]);
            live.pair_last[k] = t;
        }
    }

    /// Closes every batch whose right end is at or before `t`.
    fn roll(&mut self, t: f64) {
        loop {
            let live = self.live.as_ref().unwrap();
            if live.next > live.boundaries {
                return;
            }
            let edge = live.boundary(live.next);
            if edge > t {
                return;
            }
            let len = edge - live.boundary(live.next - 1);
            self.flush_all(edge);
            let live = self.live.as_mut().unwrap();
            let first = self
                .first
                .iter()
                .zip(&live.snap_first)
                .map(|(a, b)| (a - b) / len)
                .collect();
            let second = self
                .second
                .iter()
                .zip(&live.snap_second)
                .map(|(a, b)| (a - b) / len)
                .collect();
            live.snap_first.copy_from_slice(&self.first);
            live.snap_second.copy_from_slice(&self.second);
            live.next += 1;
            self.batches.push(Batch { len, first, second });
        }
    }
}

impl Live {
    fn boundary(&self, k: usize) -> f64 {
        if k == self.boundaries {
            self.end
        } else {
            self.start + k as f64 * self.batch_len
        }
    }
}

fn index_pairs(pairs: &[(usize, usize)]) -> HashMap<(usize, usize), usize> {
    pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect()
}

impl Observer for ErgodicAccumulator {
    fn observe(&mut self, event: &Event, _before: &[f64]) {
        let t = event.time;
        self.roll(t);
        let a = event.agent;
        let live = self.live.as_mut().unwrap();
        self.first[a] += live.x[a] * (t - live.last[a]);
        live.last[a] = t;
        for &k in &live.pairs_of[a] {
            let (v, w) = self.pairs[k];
            self.second[k] += live.x[v] * live.x[w] * (t - live.pair_last[k]);
            live.pair_last[k] = t;
        }
        live.x[a] = event.new_belief;
    }

    fn finish(&mut self, state: &BeliefState) {
        debug_assert!(state.t >= self.live.as_ref().unwrap().end);
        self.roll(f64::INFINITY);
        let live = self.live.take().unwrap();
        self.elapsed = live.end - live.start;
    }
}

/// Time-averages of one forward run of length `horizon` from `x0`.
pub fn ergodic_moments(
    net: &SocialNetwork,
    x0: &[f64],
    horizon: f64,
    seed: u64,
    pairs: &[(usize, usize)],
) -> Result<ErgodicAccumulator> {
    check_initial_state(net, x0)?;
    let mut acc = ErgodicAccumulator::new(x0, 0.0, horizon, pairs, DEFAULT_BATCHES)?;
    simulate_forward(net, x0, horizon, seed, &mut [&mut acc])?;
    Ok(acc)
}
