use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

use super::SocialNetwork;

/// Maximum tolerated detailed-balance violation `|π_v P_vw - π_w P_wv|`.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

/// Reversible, irreducible extension of the jump matrix to all of `V`.
///
/// Stubborn rows are filled by `π̃_s = Σ_a π̃_a P_as`, `P_sa = P_as π̃_a / π̃_s`,
/// `P_ss' = 0`, where `π̃` are detailed-balance weights on the regular agents.
/// Other extensions exist (e.g. with `P_ss' > 0`); mixing times and fluidity
/// depend on which one is used, hitting distributions do not.
#[derive(Clone, Debug)]
pub struct ReversibleExtension {
    p: CsrMatrix,
    pi: Vec<f64>,
    pi_stubborn: f64,
    pi_min: f64,
    weights: Vec<f64>,
}

impl ReversibleExtension {
    /// Label recorded in reports.
    pub const NAME: &'static str = "detailed-balance (P_ss' = 0)";

    pub(super) fn new(net: &SocialNetwork) -> Result<Self> {
        let n = net.n();
        let jump = net.jump_p().matrix();
        let regular = net.regular();

        // propagate weights along a spanning tree of the regular subgraph
        let mut weights = vec![0.0; n];
        let mut seen = vec![false; n];
        let root = regular[0];
        weights[root] = 1.0;
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        let mut visited = 1;
        while let Some(a) = queue.pop_front() {
            for (b, p_ab) in jump.row(a) {
                if net.is_stubborn(b) {
                    continue;
                }
                let p_ba = jump.get(b, a);
                if p_ba == 0.0 {
                    return Err(Error::Irreversible(format!(
                        "edge {} -> {} has no reverse",
                        net.name(a),
                        net.name(b)
                    )));
                }
                if !seen[b] {
                    seen[b] = true;
                    weights[b] = weights[a] * p_ab / p_ba;
                    visited += 1;
                    queue.push_back(b);
                }
            }
        }
        if visited != regular.len() {
            return Err(Error::Reducible);
        }
        let total: f64 = regular.iter().map(|&a| weights[a]).sum();
        regular.iter().for_each(|&a| weights[a] /= total);

        // check every regular-regular edge, not just the tree
        for &a in regular {
            for (b, p_ab) in jump.row(a) {
                if net.is_stubborn(b) {
                    continue;
                }
                let gap = (weights[a] * p_ab - weights[b] * jump.get(b, a)).abs();
                if gap > DETAILED_BALANCE_TOL {
                    return Err(Error::Irreversible(format!(
                        "detailed balance fails on {} <-> {} by {gap:e}",
                        net.name(a),
                        net.name(b)
                    )));
                }
            }
        }

        for &a in regular {
            for (s, p_as) in jump.row(a) {
                if net.is_stubborn(s) {
                    weights[s] += weights[a] * p_as;
                }
            }
        }
        if let Some(&s) = net.stubborn().iter().find(|&&s| weights[s] == 0.0) {
            return Err(Error::IsolatedStubborn(net.name(s).to_string()));
        }

        let mut triplets: Vec<(usize, usize, f64)> = jump.triplets().collect();
        for &a in regular {
            for (s, p_as) in jump.row(a) {
                if net.is_stubborn(s) {
                    triplets.push((s, a, p_as * weights[a] / weights[s]));
                }
            }
        }
        let p = CsrMatrix::from_triplets(n, n, triplets);

        let total: f64 = weights.iter().sum();
        let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let pi_stubborn = net.stubborn().iter().map(|&s| pi[s]).sum();
        let pi_min = pi.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(ReversibleExtension {
            p,
            pi,
            pi_stubborn,
            pi_min,
            weights,
        })
    }

    /// Extended row-stochastic jump matrix on `V × V`.
    pub fn p(&self) -> &CsrMatrix {
        &self.p
    }

    /// Invariant distribution `π`.
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `π(S)`.
    pub fn pi_stubborn(&self) -> f64 {
        self.pi_stubborn
    }

    /// `π_* = min_v π_v`.
    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    /// Unnormalized detailed-balance weights `π̃` (regular part sums to 1).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    /// `max |π_v P_vw - π_w P_wv|` over all pairs.
    pub fn detailed_balance_violation(&self) -> f64 {
        self.p
            .triplets()
            .map(|(v, w, p_vw)| (self.pi[v] * p_vw - self.pi[w] * self.p.get(w, v)).abs())
            .fold(0.0, f64::max)
    }

    /// `max_w |(πP)_w - π_w|`.
    pub fn stationarity_violation(&self) -> f64 {
        self.p
            .left_mul_vec(&self.pi)
            .iter()
            .zip(&self.pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
