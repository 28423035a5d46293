//! Exact stationary belief moments.
//!
//! The stationary mean of agent `v` is `Σ_s γ^v_s x_s`, where `γ^v` is the
//! distribution of the stubborn agent at which the dual random walk started
//! from `v` gets absorbed. Second moments solve the analogous boundary
//! problem for the coupled pair walk `K` on `V × V`, with boundary values
//! `E[X_v] E[X_w]` on pairs that touch a stubborn agent. First moments are
//! therefore always solved before second moments.

mod ode;
pub mod oracles;

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix};
use crate::network::SocialNetwork;

pub use ode::{
    backward_derivative_norm, backward_ode, backward_ode_trajectory, MomentState, ODE_TOL,
};

/// Largest pair system solved without an explicit support.
pub const PAIR_UNKNOWN_LIMIT: usize = 4_000_000;

/// Variances in `(-NEGATIVE_VARIANCE_TOL, 0)` are treated as rounding noise.
pub const NEGATIVE_VARIANCE_TOL: f64 = 1e-12;

/// Absorption distributions `γ^v` of the dual walk, one row per agent.
#[derive(Clone, Debug)]
pub struct HittingDistribution {
    stubborn: Vec<usize>,
    /// `n × |S|`, columns in [`SocialNetwork::stubborn`] order.
    gamma: DMatrix<f64>,
}

impl HittingDistribution {
    pub fn stubborn(&self) -> &[usize] {
        &self.stubborn
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// `γ^v_s` with `s` given as a node id.
    pub fn get(&self, v: usize, s: usize) -> f64 {
        let k = self
            .stubborn
            .iter()
            .position(|&t| t == s)
            .expect("not a stubborn agent");
        self.gamma[(v, k)]
    }

    pub fn row(&self, v: usize) -> Vec<f64> {
        self.gamma.row(v).iter().copied().collect()
    }

    /// `Σ_s γ^v_s f(x_s)` for every `v`.
    pub fn weighted(&self, values: &[f64]) -> Vec<f64> {
        (0..self.gamma.nrows())
            .map(|v| {
                self.gamma
                    .row(v)
                    .iter()
                    .zip(values)
                    .map(|(g, x)| g * x)
                    .sum()
            })
            .collect()
    }
}

/// `I - P_AA` over regular agents in local order.
fn absorbing_matrix(net: &SocialNetwork) -> CsrMatrix {
    let p = net.jump_p().matrix();
    let m = net.regular().len();
    let mut t = Vec::with_capacity(p.nnz() + m);
    for (i, &a) in net.regular().iter().enumerate() {
        t.push((i, i, 1.0));
        for (v, pv) in p.row(a) {
            if !net.is_stubborn(v) {
                t.push((i, net.local_index(v), -pv));
            }
        }
    }
    CsrMatrix::from_triplets(m, m, t)
}

/// Solves for `γ` and, if asked, the expected number of jumps before
/// absorption, sharing one factorization.
fn absorbing_solve(
    net: &SocialNetwork,
    with_steps: bool,
) -> Result<(HittingDistribution, Option<Vec<f64>>)> {
    let n = net.n();
    let regular = net.regular();
    let stubborn = net.stubborn();
    let k = stubborn.len();
    let a = absorbing_matrix(net);
    let cols = k + usize::from(with_steps);
    let mut rhs = DMatrix::zeros(regular.len(), cols);
    let p = net.jump_p().matrix();
    for (i, &r) in regular.iter().enumerate() {
        for (v, pv) in p.row(r) {
            if net.is_stubborn(v) {
                rhs[(i, net.local_index(v))] += pv;
            }
        }
        if with_steps {
            rhs[(i, k)] = 1.0;
        }
    }
    let sol = linalg::solve(&a, &rhs)?;
    let mut gamma = DMatrix::zeros(n, k);
    for (i, &r) in regular.iter().enumerate() {
        for c in 0..k {
            gamma[(r, c)] = sol[(i, c)];
        }
    }
    for (c, &s) in stubborn.iter().enumerate() {
        gamma[(s, c)] = 1.0;
    }
    let steps = with_steps.then(|| {
        let mut h = vec![0.0; n];
        for (i, &r) in regular.iter().enumerate() {
            h[r] = sol[(i, k)];
        }
        h
    });
    Ok((
        HittingDistribution {
            stubborn: stubborn.to_vec(),
            gamma,
        },
        steps,
    ))
}

/// Absorption probabilities of the dual walk. They depend on the jump matrix
/// only, not on the holding rates.
pub fn hitting_gamma(net: &SocialNetwork) -> Result<HittingDistribution> {
    Ok(absorbing_solve(net, false)?.0)
}

/// `γ` together with the expected number of jumps `h_v` the dual walk makes
/// before absorption (`h_s = 0`).
pub fn hitting_gamma_and_steps(net: &SocialNetwork) -> Result<(HittingDistribution, Vec<f64>)> {
    let (g, h) = absorbing_solve(net, true)?;
    Ok((g, h.unwrap()))
}

/// `E[X_v] = Σ_s γ^v_s x_s`.
pub fn expected_beliefs(net: &SocialNetwork) -> Result<Vec<f64>> {
    Ok(hitting_gamma(net)?.weighted(&net.stubborn_beliefs()))
}

/// `E[X]` from the harmonic system `Σ_v Q_av E[X_v] = 0`, `E[X_s] = x_s`,
/// solved directly with the generator instead of through `γ`.
pub fn expected_beliefs_direct(net: &SocialNetwork) -> Result<Vec<f64>> {
    let q = net.generator_q().matrix();
    let regular = net.regular();
    let m = regular.len();
    let mut t = Vec::with_capacity(q.nnz());
    let mut rhs = DMatrix::zeros(m, 1);
    for (i, &a) in regular.iter().enumerate() {
        for (v, qv) in q.row(a) {
            match net.belief(v) {
                Some(x) => rhs[(i, 0)] += qv * x,
                None => t.push((i, net.local_index(v), -qv)),
            }
        }
    }
    let sol = linalg::solve(&CsrMatrix::from_triplets(m, m, t), &rhs)?;
    let mut mean: Vec<f64> = (0..net.n()).map(|v| net.belief(v).unwrap_or(0.0)).collect();
    for (i, &a) in regular.iter().enumerate() {
        mean[a] = sol[(i, 0)];
    }
    Ok(mean)
}

/// `max_a |Σ_v P_av m_v - m_a|` over regular agents.
pub fn harmonic_residual(net: &SocialNetwork, m: &[f64]) -> f64 {
    let p = net.jump_p().matrix();
    net.regular()
        .iter()
        .map(|&a| (p.row(a).map(|(v, pv)| pv * m[v]).sum::<f64>() - m[a]).abs())
        .fold(0.0, f64::max)
}

/// Variances for unit trust everywhere, where the dual walks coalesce and
/// `X_v` is distributed as `x` at the absorption point:
/// `σ_v² = Σ_s γ^v_s x_s² - E[X_v]²`.
pub fn unit_trust_variances(net: &SocialNetwork, gamma: &HittingDistribution) -> Result<Vec<f64>> {
    require_unit_trust(net)?;
    let x = net.stubborn_beliefs();
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mean = gamma.weighted(&x);
    let second = gamma.weighted(&x2);
    Ok(mean
        .iter()
        .zip(&second)
        .map(|(m, s)| clamp_variance(s - m * m))
        .collect())
}

pub(crate) fn require_unit_trust(net: &SocialNetwork) -> Result<()> {
    match net.non_unit_trust_edge() {
        None => Ok(()),
        Some(e) => Err(Error::TrustNotUnit {
            from: net.name(e.from).to_string(),
            to: net.name(e.to).to_string(),
            trust: e.trust,
        }),
    }
}

fn clamp_variance(v: f64) -> f64 {
    if v < 0.0 && v > -NEGATIVE_VARIANCE_TOL {
        log::debug!("clamping variance {v:e} to 0");
        0.0
    } else {
        v
    }
}

/// Which second moments to solve for.
#[derive(Clone, Debug)]
pub enum PairSupport {
    /// Every pair; refused above [`PAIR_UNKNOWN_LIMIT`] unknowns.
    All,
    /// The listed pairs plus the diagonal pairs of their members, and
    /// whatever the pair walk reaches from them.
    Pairs(Vec<(usize, usize)>),
}

/// Stationary means and second moments.
#[derive(Clone, Debug)]
pub struct MomentSolution {
    pub mean: Vec<f64>,
    /// `σ_v²`; NaN for agents outside an explicit support.
    pub variance: Vec<f64>,
    /// `E[X_a X_b]` for regular `a ≤ b` in the solved support.
    solved: HashMap<(usize, usize), f64>,
    stubborn: Vec<bool>,
}

impl MomentSolution {
    /// `E[X_v X_w]`, or `None` when outside the solved support.
    pub fn second_moment(&self, v: usize, w: usize) -> Option<f64> {
        if self.stubborn[v] || self.stubborn[w] {
            return Some(self.mean[v] * self.mean[w]);
        }
        self.solved.get(&(v.min(w), v.max(w))).copied()
    }

    pub fn covariance(&self, v: usize, w: usize) -> Option<f64> {
        self.second_moment(v, w)
            .map(|m| m - self.mean[v] * self.mean[w])
    }

    /// Pearson correlation; `None` when a variance vanishes (to rounding,
    /// relative to `E[X²]`) or the pair was not solved.
    pub fn correlation(&self, v: usize, w: usize) -> Option<f64> {
        let c = self.covariance(v, w)?;
        let (a, b) = (self.variance[v], self.variance[w]);
        let noise = |u: usize| 1e-12 * (1.0 + self.mean[u] * self.mean[u]);
        if a > noise(v) && b > noise(w) {
            Some(c / (a * b).sqrt())
        } else {
            None
        }
    }

    /// Solved regular pairs `(a, b)`, `a ≤ b`, in ascending order.
    pub fn solved_pairs(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<_> = self.solved.keys().copied().collect();
        p.sort_unstable();
        p
    }

    /// Dense `E[X Xᵀ]`; requires the full support.
    pub fn second_moment_matrix(&self) -> Option<DMatrix<f64>> {
        let n = self.mean.len();
        let mut m = DMatrix::zeros(n, n);
        for v in 0..n {
            for w in 0..n {
                m[(v, w)] = self.second_moment(v, w)?;
            }
        }
        Some(m)
    }
}

/// Means plus all second moments.
pub fn moments(net: &SocialNetwork) -> Result<MomentSolution> {
    second_moments(net, &PairSupport::All)
}

fn sorted(p: (usize, usize)) -> (usize, usize) {
    (p.0.min(p.1), p.0.max(p.1))
}

/// Unordered regular pairs reachable by the pair walk from `starts`.
fn pair_closure(
    net: &SocialNetwork,
    starts: Vec<(usize, usize)>,
    limit: usize,
    ordered: bool,
) -> Result<Vec<(usize, usize)>> {
    let k = net.coupled_k();
    let canon = |p: (usize, usize)| if ordered { p } else { sorted(p) };
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = Vec::new();
    let mut queue = VecDeque::new();
    for p in starts {
        let p = canon(p);
        if !net.is_stubborn(p.0) && !net.is_stubborn(p.1) && !index.contains_key(&p) {
            index.insert(p, pairs.len());
            pairs.push(p);
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        for (t, _) in k.row(p.0, p.1) {
            let t = canon(t);
            if net.is_stubborn(t.0) || net.is_stubborn(t.1) || index.contains_key(&t) {
                continue;
            }
            if pairs.len() >= limit {
                return Err(Error::SupportTooLarge {
                    unknowns: pairs.len() + 1 + queue.len(),
                    limit,
                });
            }
            index.insert(t, pairs.len());
            pairs.push(t);
            queue.push_back(t);
        }
    }
    Ok(pairs)
}

/// Solves the pair system over the support. See [`PairSupport`].
pub fn second_moments(net: &SocialNetwork, support: &PairSupport) -> Result<MomentSolution> {
    let n = net.n();
    let mean = expected_beliefs(net)?;
    let regular = net.regular();
    let starts: Vec<(usize, usize)> = match support {
        PairSupport::All => {
            let m = regular.len();
            if m.saturating_mul(m) > PAIR_UNKNOWN_LIMIT {
                return Err(Error::SupportTooLarge {
                    unknowns: m * m,
                    limit: PAIR_UNKNOWN_LIMIT,
                });
            }
            let mut s = Vec::with_capacity(m * (m + 1) / 2);
            for (i, &a) in regular.iter().enumerate() {
                for &b in &regular[i..] {
                    s.push((a, b));
                }
            }
            s
        }
        PairSupport::Pairs(list) => {
            let mut s = Vec::with_capacity(3 * list.len());
            for &(v, w) in list {
                if v >= n || w >= n {
                    return Err(Error::UnknownNode(format!("#{}", v.max(w))));
                }
                s.extend([(v, w), (v, v), (w, w)]);
            }
            s
        }
    };
    let pairs = pair_closure(net, starts, PAIR_UNKNOWN_LIMIT, false)?;
    let index: HashMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let k = net.coupled_k();
    let u = pairs.len();
    let mut t = Vec::new();
    let mut rhs = DMatrix::zeros(u, 1);
    for (i, &(a, b)) in pairs.iter().enumerate() {
        for (target, rate) in k.row(a, b) {
            if net.is_stubborn(target.0) || net.is_stubborn(target.1) {
                rhs[(i, 0)] += rate * mean[target.0] * mean[target.1];
            } else {
                t.push((i, index[&sorted(target)], -rate));
            }
        }
    }
    let sol = linalg::solve(&CsrMatrix::from_triplets(u, u, t), &rhs)?;
    let solved: HashMap<(usize, usize), f64> = pairs
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, sol[(i, 0)]))
        .collect();

    let mut variance = vec![f64::NAN; n];
    for v in 0..n {
        if net.is_stubborn(v) {
            variance[v] = 0.0;
        } else if let Some(m2) = solved.get(&(v, v)) {
            variance[v] = clamp_variance(m2 - mean[v] * mean[v]);
        }
    }
    let stubborn = (0..n).map(|v| net.is_stubborn(v)).collect();
    Ok(MomentSolution {
        mean,
        variance,
        solved,
        stubborn,
    })
}

/// Joint absorption law `η^{vw}_{ss'}` of the pair walk started at `(v, w)`.
#[derive(Clone, Debug)]
pub struct PairHitting {
    stubborn: Vec<usize>,
    /// `|S| × |S|` matrix per requested pair, indices in stubborn order.
    eta: HashMap<(usize, usize), DMatrix<f64>>,
}

impl PairHitting {
    pub fn stubborn(&self) -> &[usize] {
        &self.stubborn
    }

    pub fn get(&self, v: usize, w: usize) -> Option<&DMatrix<f64>> {
        self.eta.get(&(v, w))
    }

    /// `Σ_{s,s'} η_{ss'} x_s x_{s'}`, which equals `E[X_v X_w]`.
    pub fn second_moment(&self, v: usize, w: usize, x: &[f64]) -> Option<f64> {
        let eta = self.get(v, w)?;
        let mut acc = 0.0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                acc += eta[(i, j)] * x[i] * x[j];
            }
        }
        Some(acc)
    }
}

/// `η` for the requested ordered pairs. Once one walk is absorbed the other
/// moves on alone, so pairs touching `S` have `η_{ss'} = γ^v_s γ^w_{s'}`.
pub fn pair_hitting(net: &SocialNetwork, requested: &[(usize, usize)]) -> Result<PairHitting> {
    let gamma = hitting_gamma(net)?;
    let k_s = net.stubborn().len();
    let pairs = pair_closure(net, requested.to_vec(), PAIR_UNKNOWN_LIMIT, true)?;
    let index: HashMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let boundary = |v: usize, w: usize, col: usize| {
        gamma.matrix()[(v, col / k_s)] * gamma.matrix()[(w, col % k_s)]
    };

    let k = net.coupled_k();
    let u = pairs.len();
    let mut t = Vec::new();
    let mut rhs = DMatrix::zeros(u, k_s * k_s);
    for (i, &(a, b)) in pairs.iter().enumerate() {
        for (target, rate) in k.row(a, b) {
            if net.is_stubborn(target.0) || net.is_stubborn(target.1) {
                for c in 0..k_s * k_s {
                    rhs[(i, c)] += rate * boundary(target.0, target.1, c);
                }
            } else {
                t.push((i, index[&target], -rate));
            }
        }
    }
    let sol = linalg::solve(&CsrMatrix::from_triplets(u, u, t), &rhs)?;
    let mut eta = HashMap::new();
    for &(v, w) in requested {
        let m = DMatrix::from_fn(k_s, k_s, |i, j| match index.get(&(v, w)) {
            Some(&r) => sol[(r, i * k_s + j)],
            None => boundary(v, w, i * k_s + j),
        });
        eta.insert((v, w), m);
    }
    Ok(PairHitting {
        stubborn: net.stubborn().to_vec(),
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::UndirectedGraph;
    use crate::network::NetworkBuilder;

    fn line(n: usize, trust: f64) -> SocialNetwork {
        let g = UndirectedGraph::new(n, (0..n - 1).map(|i| (i, i + 1))).unwrap();
        SocialNetwork::canonical(&g, &[(0, 0.0), (n - 1, 1.0)], trust).unwrap()
    }

    fn single_agent(theta: f64) -> SocialNetwork {
        let mut b = NetworkBuilder::new();
        b.regular("a").unwrap();
        b.stubborn("s0", 0.0).unwrap();
        b.stubborn("s1", 1.0).unwrap();
        b.edge("a", "s0", 0.5, theta).unwrap();
        b.edge("a", "s1", 0.5, theta).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn line_four_means() {
        let net = line(4, 0.5);
        let m = expected_beliefs(&net).unwrap();
        let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for v in 0..4 {
            assert!((m[v] - want[v]).abs() < 1e-14);
        }
        let d = expected_beliefs_direct(&net).unwrap();
        for v in 0..4 {
            assert!((m[v] - d[v]).abs() < 1e-12);
        }
        assert!(harmonic_residual(&net, &m) < 1e-14);
    }

    #[test]
    fn line_five_gamma() {
        let net = line(5, 1.0);
        let g = hitting_gamma(&net).unwrap();
        assert!((g.get(1, 4) - 0.25).abs() < 1e-14);
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(4, 0), 0.0);
    }

    #[test]
    fn constant_beliefs_give_constant_means() {
        let net = line(6, 0.3).map_beliefs(|_| 2.5).unwrap();
        assert!(expected_beliefs(&net)
            .unwrap()
            .iter()
            .all(|m| (m - 2.5).abs() < 1e-13));
    }

    #[test]
    fn single_agent_variance() {
        for theta in [0.25, 0.5, 1.0] {
            let sol = moments(&single_agent(theta)).unwrap();
            assert!((sol.mean[0] - 0.5).abs() < 1e-15);
            let want = theta / (4.0 * (2.0 - theta));
            assert!(
                (sol.variance[0] - want).abs() < 1e-14,
                "{theta}: {}",
                sol.variance[0]
            );
        }
    }

    #[test]
    fn line_five_unit_trust_variances() {
        let net = line(5, 1.0);
        let sol = moments(&net).unwrap();
        let want = [0.0, 3.0 / 16.0, 0.25, 3.0 / 16.0, 0.0];
        for v in 0..5 {
            assert!((sol.variance[v] - want[v]).abs() < 1e-13);
        }
        let fast = unit_trust_variances(&net, &hitting_gamma(&net).unwrap()).unwrap();
        for v in 0..5 {
            assert!((fast[v] - want[v]).abs() < 1e-13);
        }
        assert_eq!(sol.second_moment(0, 4), Some(0.0));
        assert!(unit_trust_variances(&line(5, 0.5), &hitting_gamma(&net).unwrap()).is_err());
    }

    #[test]
    fn hitting_steps_on_line() {
        // simple random walk on 0..4 absorbed at both ends: h_k = k (4 - k)
        let (_, h) = hitting_gamma_and_steps(&line(5, 0.7)).unwrap();
        for k in 0..5 {
            assert!((h[k] - (k * (4 - k)) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_support_matches_full() {
        let net = line(6, 0.4);
        let full = moments(&net).unwrap();
        let part = second_moments(&net, &PairSupport::Pairs(vec![(1, 3)])).unwrap();
        assert!(
            (full.second_moment(1, 3).unwrap() - part.second_moment(1, 3).unwrap()).abs() < 1e-13
        );
        assert!((full.variance[1] - part.variance[1]).abs() < 1e-13);
    }

    #[test]
    fn eta_reproduces_second_moments() {
        let net = line(5, 0.6);
        let sol = moments(&net).unwrap();
        let x = net.stubborn_beliefs();
        let req = [(1, 3), (2, 2), (1, 4), (3, 1)];
        let eta = pair_hitting(&net, &req).unwrap();
        let g = hitting_gamma(&net).unwrap();
        for &(v, w) in &req {
            let m = eta.get(v, w).unwrap();
            assert!((m.sum() - 1.0).abs() < 1e-12);
            assert!(
                (eta.second_moment(v, w, &x).unwrap() - sol.second_moment(v, w).unwrap()).abs()
                    < 1e-12
            );
            // marginal over the second walk is γ^v
            for i in 0..2 {
                assert!((m.row(i).sum() - g.matrix()[(v, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn support_limit_reported() {
        let err = pair_closure(&line(30, 0.5), vec![(1, 2)], 10, false).unwrap_err();
        assert!(matches!(err, Error::SupportTooLarge { limit: 10, .. }));
    }
}
