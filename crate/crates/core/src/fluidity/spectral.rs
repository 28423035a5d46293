//! Mixing, relaxation, conductance and hitting times of a reversible jump
//! matrix, for the continuous-time chain with rate-1 holding times.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lanczos_largest, solve, CsrMatrix};

/// Largest chain for which [`mixing_time`] forms transition matrices.
pub const MIXING_STATE_CAP: usize = 5000;
/// Poisson tail mass dropped when truncating the uniformization series.
pub const UNIFORMIZATION_TAIL: f64 = 1e-12;
/// Default time resolution of the mixing-time bisection.
pub const DEFAULT_TIME_TOL: f64 = 1e-3;
/// Largest chain whose conductance is found by enumerating all subsets.
pub const EXACT_CONDUCTANCE_MAX: usize = 20;
/// Largest chain whose spectrum is computed densely.
const DENSE_EIGEN_MAX: usize = 1000;

/// Threshold on `max_{v,w} Σ_u |P_v(V(t)=u) - P_w(V(t)=u)|`.
pub fn mixing_threshold() -> f64 {
    2.0 / std::f64::consts::E
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingTime {
    pub tau: f64,
    /// `(t, distance)` for every evaluated time, in evaluation order. Where
    /// the chain has not mixed yet, the distance is a lower bound above `2/e`.
    pub evaluations: Vec<(f64, f64)>,
    /// Whether the evaluated distances are non-increasing in `t`.
    pub monotone: bool,
}

/// Rows of `e^{t(P-I)}`, row-major, by uniformization:
/// `Σ_k e^{-t} t^k / k! P^k`, truncated once the Poisson tail drops below
/// [`UNIFORMIZATION_TAIL`].
pub fn transition_matrix(p: &CsrMatrix, t: f64) -> Vec<f64> {
    let n = p.nrows();
    let mut power = vec![0.0; n * n];
    (0..n).for_each(|i| power[i * n + i] = 1.0);
    let mut next = vec![0.0; n * n];
    let mut log_w = -t;
    let mut mass = log_w.exp();
    let mut acc: Vec<f64> = power.iter().map(|x| x * mass).collect();
    let mut k = 0usize;
    while 1.0 - mass >= UNIFORMIZATION_TAIL || (k as f64) < t {
        k += 1;
        next.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            row.iter_mut().for_each(|x| *x = 0.0);
            for (j, pij) in p.row(i) {
                let src = &power[j * n..(j + 1) * n];
                row.iter_mut().zip(src).for_each(|(r, s)| *r += pij * s);
            }
        });
        std::mem::swap(&mut power, &mut next);
        log_w += t.ln() - (k as f64).ln();
        let w = log_w.exp();
        mass += w;
        if w > 0.0 {
            acc.par_iter_mut()
                .zip(power.par_iter())
                .for_each(|(a, b)| *a += w * b);
        }
        if k > 10 * (t as usize + 100) {
            break;
        }
    }
    acc
}

/// `max_{v,w} Σ_u |rows[v][u] - rows[w][u]|`.
pub fn max_pair_distance(rows: &[f64], pi: &[f64]) -> f64 {
    pair_distance_search(rows, pi, f64::INFINITY).0
}

/// Searches pairs in tiles of rows ordered by decreasing distance to `π`,
/// skipping tiles that the triangle inequality through `π` rules out.
/// Stops once a pair farther apart than `stop` is found. Returns the largest
/// distance seen and whether the search was exhaustive.
fn pair_distance_search(rows: &[f64], pi: &[f64], stop: f64) -> (f64, bool) {
    const TILE: usize = 32;
    let n = pi.len();
    let row = |v: usize| &rows[v * n..(v + 1) * n];
    let mut to_pi: Vec<(f64, usize)> = (0..n).into_par_iter().map(|v| (l1(row(v), pi), v)).collect();
    to_pi.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tiles = n.div_ceil(TILE);
    let span = |t: usize| t * TILE..((t + 1) * TILE).min(n);
    let mut best = 0.0f64;
    for ti in 0..tiles {
        if 2.0 * to_pi[ti * TILE].0 <= best {
            break;
        }
        let found = (ti..tiles)
            .into_par_iter()
            .map(|tj| {
                let mut local = 0.0f64;
                if to_pi[ti * TILE].0 + to_pi[tj * TILE].0 <= best {
                    return local;
                }
                for i in span(ti) {
                    for j in span(tj).filter(|&j| j > i) {
                        if to_pi[i].0 + to_pi[j].0 > best.max(local) {
                            local = local.max(l1(row(to_pi[i].1), row(to_pi[j].1)));
                        }
                    }
                }
                local
            })
            .reduce(|| 0.0, f64::max);
        best = best.max(found);
        if best > stop {
            return (best, false);
        }
    }
    (best, true)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    // eight independent partial sums so the loop vectorizes
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y).abs()).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += (x[k] - y[k]).abs();
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// First `t` (to within `tol_time`) at which the pairwise distance of the
/// rate-1 chain with jump matrix `p` drops to `2/e`.
///
/// The bracket starts from `[0, hint]` when a positive hint (such as the
/// relaxation time) is given and doubles until it holds the crossing.
pub fn mixing_time(p: &CsrMatrix, pi: &[f64], tol_time: f64) -> Result<MixingTime> {
    mixing_time_from(p, pi, tol_time, 1.0)
}

pub fn mixing_time_from(p: &CsrMatrix, pi: &[f64], tol_time: f64, hint: f64) -> Result<MixingTime> {
    let n = p.nrows();
    if n > MIXING_STATE_CAP {
        return Err(Error::StateCapExceeded {
            states: n,
            cap: MIXING_STATE_CAP,
        });
    }
    if pi.len() != n {
        return Err(Error::InvalidArgument(
            "stationary distribution has the wrong length".into(),
        ));
    }
    if !(tol_time > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time resolution must be positive, got {tol_time}"
        )));
    }
    let threshold = mixing_threshold();
    let mut evaluations = Vec::new();
    // above the threshold the search stops at the first witness pair, so
    // only distances at or below it are exact
    let mut probe = |t: f64| {
        let (d, exhaustive) = pair_distance_search(&transition_matrix(p, t), pi, threshold);
        evaluations.push((t, d, exhaustive));
        (d, exhaustive)
    };
    let mut hi = if hint > 0.0 && hint.is_finite() { hint } else { 1.0 };
    let (mut lo, mut d_lo) = (0.0, 2.0);
    if n > 1 {
        let mut d_hi;
        loop {
            let (d, mixed) = probe(hi);
            if mixed {
                d_hi = d;
                break;
            }
            (lo, d_lo) = (hi, d);
            hi *= 2.0;
            if hi > 1e7 {
                return Err(Error::InvalidArgument(
                    "chain does not mix; is it irreducible?".into(),
                ));
            }
        }
        // ln d is close to linear in t; interpolate, then probe just across
        // the guess so a good guess closes the bracket at once
        let mut from_left = true;
        while hi - lo > tol_time {
            let width = hi - lo;
            let guess = if d_hi > 0.0 && width > 4.0 * tol_time {
                let frac = (d_lo / threshold).ln() / (d_lo / d_hi).ln();
                let g = lo + frac * width;
                let g = if from_left { g + 0.45 * tol_time } else { g - 0.45 * tol_time };
                g.clamp(lo + 0.05 * width, hi - 0.05 * width)
            } else {
                0.5 * (lo + hi)
            };
            let (d, mixed) = probe(guess);
            if mixed {
                (hi, d_hi) = (guess, d);
                from_left = false;
            } else {
                (lo, d_lo) = (guess, d);
                from_left = true;
            }
            if hi - lo > 0.5 * width {
                // the guess landed near an end; fall back to bisection once
                let mid = 0.5 * (lo + hi);
                let (d, mixed) = probe(mid);
                if mixed {
                    (hi, d_hi) = (mid, d);
                } else {
                    (lo, d_lo) = (mid, d);
                }
            }
        }
    } else {
        hi = 0.0;
    }
    let mut sorted = evaluations.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // exact values must not increase, and no unmixed time may follow a mixed one
    let monotone = sorted.windows(2).all(|w| match (w[0].2, w[1].2) {
        (true, true) => w[1].1 <= w[0].1 + 1e-9,
        (true, false) => false,
        _ => true,
    });
    debug_assert!(monotone, "distance increased along the bisection");
    let evaluations = evaluations.into_iter().map(|(t, d, _)| (t, d)).collect();
    Ok(MixingTime {
        tau: hi,
        evaluations,
        monotone,
    })
}

/// Second eigenpair of a reversible jump matrix.
#[derive(Clone, Debug)]
pub struct SpectralGap {
    pub lambda2: f64,
    /// `1 / (1 - λ₂)`.
    pub tau2: f64,
    /// Right eigenvector of `P` for `λ₂`.
    pub fiedler: Vec<f64>,
}

/// `λ₂` of `D^{1/2} P D^{-1/2}`, `D = diag(π)`, which is symmetric when `P`
/// is `π`-reversible.
pub fn spectral_gap(p: &CsrMatrix, pi: &[f64]) -> Result<SpectralGap> {
    let n = p.nrows();
    if n < 2 {
        return Err(Error::Eigen("need at least two states".into()));
    }
    let sq: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
    let (lambda2, u) = if n <= DENSE_EIGEN_MAX {
        let mut s = DMatrix::zeros(n, n);
        for (v, w, pvw) in p.triplets() {
            s[(v, w)] = sq[v] * pvw / sq[w];
        }
        let s = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(s, 1e-14, 0)
            .ok_or_else(|| Error::Eigen("no convergence".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let k = order[1];
        (
            eig.eigenvalues[k],
            eig.eigenvectors
                .column(k)
                .iter()
                .copied()
                .collect::<Vec<f64>>(),
        )
    } else {
        let apply = |x: &[f64], out: &mut [f64]| {
            let y: Vec<f64> = x.iter().zip(&sq).map(|(a, b)| a / b).collect();
            let py = p.mul_vec(&y);
            out.iter_mut()
                .zip(py.iter().zip(&sq))
                .for_each(|(o, (a, b))| *o = a * b);
        };
        let top: f64 = sq.iter().map(|x| x * x).sum::<f64>().sqrt();
        let top: Vec<f64> = sq.iter().map(|x| x / top).collect();
        lanczos_largest(n, apply, Some(&top), 600, 1e-10)?
    };
    if !(lambda2 < 1.0) {
        return Err(Error::Eigen(format!(
            "second eigenvalue {lambda2} is not below 1"
        )));
    }
    let fiedler = u.iter().zip(&sq).map(|(a, b)| a / b).collect();
    Ok(SpectralGap {
        lambda2,
        tau2: 1.0 / (1.0 - lambda2),
        fiedler,
    })
}

/// Relaxation time `τ₂ = 1/(1 - λ₂)`.
pub fn relaxation_time(p: &CsrMatrix, pi: &[f64]) -> Result<f64> {
    Ok(spectral_gap(p, pi)?.tau2)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Conductance {
    /// `min Σ_{v∈U, w∉U} π_v P_vw / min(π(U), 1 - π(U))`.
    pub value: f64,
    /// `true` for exhaustive enumeration, `false` for a sweep-cut upper bound.
    pub exact: bool,
    /// A minimizing set (or the best sweep set).
    pub set: Vec<usize>,
}

/// Conductance of a reversible chain: exact up to [`EXACT_CONDUCTANCE_MAX`]
/// states, otherwise the best level set of the Fiedler vector.
pub fn conductance(p: &CsrMatrix, pi: &[f64], fiedler: Option<&[f64]>) -> Result<Conductance> {
    let n = p.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "conductance needs at least two states".into(),
        ));
    }
    let flow = |v: usize| {
        p.row(v)
            .filter(move |&(w, _)| w != v)
            .map(move |(w, pvw)| (w, pi[v] * pvw))
    };
    if n <= EXACT_CONDUCTANCE_MAX {
        // Gray-code walk through all subsets, one toggle per step
        let mut inside = vec![false; n];
        let (mut mass, mut cut) = (0.0, 0.0);
        let mut best = (f64::INFINITY, 0u64);
        let mut mask = 0u64;
        for i in 1u64..(1 << n) {
            let v = i.trailing_zeros() as usize;
            let sign = if inside[v] { -1.0 } else { 1.0 };
            for (w, q) in flow(v) {
                cut += if inside[w] { -sign * q } else { sign * q };
            }
            inside[v] = !inside[v];
            mask ^= 1 << v;
            mass += sign * pi[v];
            // the full set has an empty complement; rounding must not let it in
            if mask == (1 << n) - 1 {
                continue;
            }
            let denom = mass.min(1.0 - mass);
            if denom > 0.0 && cut / denom < best.0 {
                best = (cut / denom, mask);
            }
        }
        // the running sums drift; recompute the winner from scratch
        let set: Vec<usize> = (0..n).filter(|v| best.1 >> v & 1 == 1).collect();
        let member = |v: usize| best.1 >> v & 1 == 1;
        let cut: f64 = set
            .iter()
            .flat_map(|&v| flow(v))
            .filter(|&(w, _)| !member(w))
            .map(|(_, q)| q)
            .sum();
        let inner: f64 = set.iter().map(|&v| pi[v]).sum();
        let outer: f64 = (0..n).filter(|&v| !member(v)).map(|v| pi[v]).sum();
        return Ok(Conductance {
            value: cut / inner.min(outer),
            exact: true,
            set,
        });
    }
    let owned;
    let f = match fiedler {
        Some(f) => f,
        None => {
            owned = spectral_gap(p, pi)?.fiedler;
            &owned
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
    let mut inside = vec![false; n];
    let (mut mass, mut cut) = (0.0, 0.0);
    let (mut best, mut best_k) = (f64::INFINITY, 0);
    for (k, &v) in order.iter().enumerate().take(n - 1) {
        for (w, q) in flow(v) {
            cut += if inside[w] { -q } else { q };
        }
        inside[v] = true;
        mass += pi[v];
        let denom = mass.min(1.0 - mass);
        if denom > 0.0 && cut / denom < best {
            best = cut / denom;
            best_k = k;
        }
    }
    let mut set = order[..=best_k].to_vec();
    set.sort_unstable();
    Ok(Conductance {
        value: best,
        exact: false,
        set,
    })
}

/// `E_π[T_S] = Σ_v π_v h_v` with `h_v = 1 + Σ_w P_vw h_w` off the target set
/// and `h = 0` on it.
pub fn expected_hitting_time(p: &CsrMatrix, pi: &[f64], target: &[bool]) -> Result<f64> {
    let n = p.nrows();
    if target.len() != n || pi.len() != n {
        return Err(Error::InvalidArgument(
            "target mask or distribution has the wrong length".into(),
        ));
    }
    if !target.iter().any(|&t| t) {
        return Err(Error::InvalidArgument("target set is empty".into()));
    }
    let free: Vec<usize> = (0..n).filter(|&v| !target[v]).collect();
    if free.is_empty() {
        return Ok(0.0);
    }
    let mut local = vec![usize::MAX; n];
    free.iter().enumerate().for_each(|(i, &v)| local[v] = i);
    let mut triplets = Vec::new();
    for (i, &v) in free.iter().enumerate() {
        triplets.push((i, i, 1.0));
        for (w, pvw) in p.row(v) {
            if !target[w] {
                triplets.push((i, local[w], -pvw));
            }
        }
    }
    let a = CsrMatrix::from_triplets(free.len(), free.len(), triplets);
    let h = solve(&a, &DMatrix::from_element(free.len(), 1, 1.0))?;
    Ok(free
        .iter()
        .enumerate()
        .map(|(i, &v)| pi[v] * h[(i, 0)])
        .sum())
}

/// Lower bound `1/(2π(S)) - 3/2` on `E_π[T_S]`.
pub fn hitting_time_lower_bound(pi_target: f64) -> f64 {
    1.0 / (2.0 * pi_target) - 1.5
}
