//! Closed forms for special topologies, used to cross-check the generic
//! solvers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generators::{normalize_generators, torus_coords};
use crate::network::SocialNetwork;

fn precondition(msg: impl Into<String>) -> Error {
    Error::OraclePrecondition(msg.into())
}

/// Means (and unit-trust variances) on a tree with two stubborn agents.
#[derive(Clone, Debug)]
pub struct TreeOracle {
    pub mean: Vec<f64>,
    /// Present when every edge has unit trust.
    pub variance: Option<Vec<f64>>,
}

/// On the path between `s0` and `s1` the mean interpolates linearly in the
/// distance to each end. Every other node takes the value of the path node
/// its branch hangs from, since the walk must pass through it.
///
/// Requires the canonical jump matrix `P_av = 1/d_a`; with unequal weights
/// the interpolation is no longer linear.
pub fn tree_oracle(net: &SocialNetwork, s0: usize, s1: usize) -> Result<TreeOracle> {
    // an edge between two stubborn agents carries no meetings, so the
    // network's own graph may be a forest
    let g = net.undirected();
    let n = g.n();
    if s0 >= n || s1 >= n {
        return Err(precondition("stubborn ids out of range"));
    }
    let dist0 = g.distances(s0);
    let components = {
        let mut seen = vec![false; n];
        let mut count = 0;
        for v in 0..n {
            if !seen[v] {
                count += 1;
                for (w, d) in g.distances(v).into_iter().enumerate() {
                    if d.is_some() {
                        seen[w] = true;
                    }
                }
            }
        }
        count
    };
    if g.edges().len() + components != n {
        return Err(precondition("underlying graph is not a tree"));
    }
    let mut s = net.stubborn().to_vec();
    s.sort_unstable();
    let mut want = vec![s0, s1];
    want.sort_unstable();
    if s != want || s0 == s1 {
        return Err(precondition("stubborn set must be exactly {s0, s1}"));
    }
    let p = net.jump_p();
    for &a in net.regular() {
        let d = g.degree(a) as f64;
        if net.out_edges(a).len() != g.degree(a)
            || g.neighbors(a)
                .iter()
                .any(|&v| (p.get(a, v) - 1.0 / d).abs() > 1e-12)
        {
            return Err(precondition(format!(
                "agent {} does not jump uniformly to its neighbours",
                net.name(a)
            )));
        }
    }
    let (x0, x1) = (net.belief(s0).unwrap(), net.belief(s1).unwrap());
    let dist1 = g.distances(s1);

    // attach every node to its nearest node on the s0 - s1 path
    let mut anchor = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    if let Some(span) = dist0[s1] {
        for v in 0..n {
            if let (Some(a), Some(b)) = (dist0[v], dist1[v]) {
                if a + b == span {
                    anchor[v] = v;
                    queue.push_back(v);
                }
            }
        }
    }
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if anchor[w] == usize::MAX {
                anchor[w] = anchor[u];
                queue.push_back(w);
            }
        }
    }
    // (weight on x1, weight on x0) per node; components reaching only one
    // stubborn agent take its belief
    let weights: Vec<(f64, f64)> = (0..n)
        .map(|v| match anchor[v] {
            usize::MAX if dist0[v].is_some() => (0.0, 1.0),
            usize::MAX => (1.0, 0.0),
            a => {
                let (d0, d1) = (dist0[a].unwrap() as f64, dist1[a].unwrap() as f64);
                (d0 / (d0 + d1), d1 / (d0 + d1))
            }
        })
        .collect();
    let mean = weights.iter().map(|(w1, w0)| w1 * x1 + w0 * x0).collect();
    let variance = net.has_unit_trust().then(|| {
        weights
            .iter()
            .map(|(w1, w0)| w1 * w0 * (x0 - x1).powi(2))
            .collect()
    });
    Ok(TreeOracle { mean, variance })
}

/// Stationary means on the barbell of [`crate::generators::barbell`] with
/// `s0 = 0`, `s1 = n - 1`, bridge `{a0, a1} = {n/2 - 1, n/2}`.
pub fn barbell_oracle(n: usize, x0: f64, x1: f64) -> Result<Vec<f64>> {
    if n < 6 || n % 2 != 0 {
        return Err(precondition("barbell needs even n >= 6"));
    }
    let h = n / 2;
    let d = n as f64 + 8.0;
    let nf = n as f64;
    Ok((0..n)
        .map(|v| {
            if v == 0 {
                x0
            } else if v == n - 1 {
                x1
            } else if v == h - 1 {
                ((nf + 4.0) * x0 + 4.0 * x1) / d
            } else if v == h {
                (4.0 * x0 + (nf + 4.0) * x1) / d
            } else if v < h {
                ((nf + 6.0) * x0 + 2.0 * x1) / d
            } else {
                (2.0 * x0 + (nf + 6.0) * x1) / d
            }
        })
        .collect())
}

/// Fourier data of the simple random walk on an Abelian Cayley graph.
struct CayleySpectrum {
    m: usize,
    d: usize,
    /// `(l, 1 - λ_l)` for every nonzero frequency `l`.
    modes: Vec<(Vec<usize>, f64)>,
}

impl CayleySpectrum {
    fn new(m: usize, d: usize, gens: &[Vec<i64>]) -> Result<Self> {
        let gens = normalize_generators(m, d, gens).map_err(|e| precondition(e.to_string()))?;
        let n = m.pow(d as u32);
        let w = 2.0 * std::f64::consts::PI / m as f64;
        let modes = (1..n)
            .map(|idx| {
                let l = torus_coords(idx, m, d);
                // averaging over all of Θ also covers self-inverse generators
                let lambda = gens
                    .iter()
                    .map(|k| (w * dotm(&l, k, m) as f64).cos())
                    .sum::<f64>()
                    / gens.len() as f64;
                (l, 1.0 - lambda)
            })
            .collect();
        Ok(CayleySpectrum { m, d, modes })
    }

    fn phase(&self, l: &[usize], diff: &[i64]) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI / self.m as f64;
        let dot: i64 = l.iter().zip(diff).map(|(a, b)| *a as i64 * b).sum();
        Complex64::from_polar(1.0, w * dot.rem_euclid(self.m as i64) as f64)
    }

    fn diff(&self, v: usize, w: usize) -> Vec<i64> {
        let a = torus_coords(v, self.m, self.d);
        let b = torus_coords(w, self.m, self.d);
        a.iter()
            .zip(&b)
            .map(|(x, y)| *x as i64 - *y as i64)
            .collect()
    }

    /// `m^d Z_vw`, the Green function without its normalisation.
    fn green(&self, v: usize, w: usize) -> Complex64 {
        let diff = self.diff(v, w);
        self.modes
            .iter()
            .map(|(l, gap)| self.phase(l, &diff) / gap)
            .sum()
    }
}

fn dotm(l: &[usize], k: &[usize], m: usize) -> usize {
    l.iter().zip(k).map(|(a, b)| a * b).sum::<usize>() % m
}

/// Largest imaginary part tolerated in a Fourier sum that must be real.
pub const FOURIER_IMAG_TOL: f64 = 1e-10;

/// Expected hitting time `E_v[T_w]` of the discrete-time simple random walk
/// on the Cayley graph, `E_vw = n (Z_ww - Z_vw)`.
pub fn cayley_hitting_time(
    m: usize,
    d: usize,
    gens: &[Vec<i64>],
    v: usize,
    w: usize,
) -> Result<f64> {
    let spec = CayleySpectrum::new(m, d, gens)?;
    // Z = green / n, so n (Z_ww - Z_vw) is the difference of green values
    let e = spec.green(w, w) - spec.green(v, w);
    check_real(e, "hitting time")?;
    Ok(e.re)
}

fn check_real(z: Complex64, what: &str) -> Result<()> {
    if z.im.abs() > FOURIER_IMAG_TOL * z.re.abs().max(1.0) {
        return Err(precondition(format!(
            "{what} has imaginary residue {:e}",
            z.im
        )));
    }
    Ok(())
}

/// `γ^a_{s1}` for every node of the Cayley graph of `Z_m^d` with generating
/// set `gens` and stubborn agents `s0`, `s1` (node indices as in
/// [`crate::generators::torus_index`]).
///
/// The derivation assumes `E_{s0 s1} = E_{s1 s0}`; this is checked on the
/// instance rather than assumed.
pub fn cayley_oracle(
    m: usize,
    d: usize,
    gens: &[Vec<i64>],
    s0: usize,
    s1: usize,
) -> Result<Vec<f64>> {
    let spec = CayleySpectrum::new(m, d, gens)?;
    let n = m.pow(d as u32);
    if s0 >= n || s1 >= n || s0 == s1 {
        return Err(precondition("s0 and s1 must be distinct nodes"));
    }
    let e01 = spec.green(s1, s1) - spec.green(s0, s1);
    let e10 = spec.green(s0, s0) - spec.green(s1, s0);
    check_real(e01, "E_{s0 s1}")?;
    check_real(e10, "E_{s1 s0}")?;
    if (e01.re - e10.re).abs() > 1e-9 * e01.re.abs().max(1.0) {
        return Err(precondition(format!(
            "hitting times differ: {} vs {}",
            e01.re, e10.re
        )));
    }

    let d01 = spec.diff(s0, s1);
    let denom: Complex64 = spec
        .modes
        .iter()
        .map(|(l, gap)| (Complex64::new(1.0, 0.0) - spec.phase(l, &d01)) / gap)
        .sum();
    check_real(denom, "normaliser")?;
    let denom = 2.0 * denom.re;
    (0..n)
        .map(|a| {
            let da1 = spec.diff(a, s1);
            let da0 = spec.diff(a, s0);
            let num: Complex64 = spec
                .modes
                .iter()
                .map(|(l, gap)| (spec.phase(l, &da1) - spec.phase(l, &da0)) / gap)
                .sum();
            check_real(num, "numerator")?;
            Ok(0.5 + num.re / denom)
        })
        .collect()
}

/// Largest population accepted by [`brute_force_gamma`].
pub const BRUTE_FORCE_MAX: usize = 12;

/// `γ` by squaring the absorbing jump matrix until the mass still on
/// regular agents is below `tail`. Returns `γ` (`n × |S|`) and the
/// remaining mass, which bounds the entrywise error.
pub fn brute_force_gamma(net: &SocialNetwork, tail: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = net.n();
    if n > BRUTE_FORCE_MAX {
        return Err(precondition(format!(
            "brute force limited to {BRUTE_FORCE_MAX} agents"
        )));
    }
    let p = net.jump_p();
    let mut m = DMatrix::from_fn(n, n, |v, w| {
        if net.is_stubborn(v) {
            f64::from(u8::from(v == w))
        } else {
            p.get(v, w)
        }
    });
    let remaining = |m: &DMatrix<f64>| {
        net.regular()
            .iter()
            .map(|&v| net.regular().iter().map(|&w| m[(v, w)]).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut left = remaining(&m);
    for _ in 0..64 {
        if left < tail {
            break;
        }
        m = &m * &m;
        left = remaining(&m);
    }
    if left >= tail {
        return Err(Error::NotConverged {
            sweeps: 64,
            residual: left,
        });
    }
    let s = net.stubborn();
    Ok((DMatrix::from_fn(n, s.len(), |v, k| m[(v, s[k])]), left))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{barbell, cayley_torus, torus_index, unit_generators};
    use crate::graph::UndirectedGraph;
    use crate::moments::{expected_beliefs, hitting_gamma};

    #[test]
    fn line_five_tree_oracle() {
        let g = UndirectedGraph::new(5, (0..4).map(|i| (i, i + 1))).unwrap();
        let net = SocialNetwork::canonical(&g, &[(0, 0.0), (4, 1.0)], 1.0).unwrap();
        let o = tree_oracle(&net, 0, 4).unwrap();
        assert_eq!(o.mean, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let v = o.variance.unwrap();
        assert_eq!(v, vec![0.0, 3.0 / 16.0, 0.25, 3.0 / 16.0, 0.0]);
    }

    #[test]
    fn star_oracles() {
        let g = UndirectedGraph::new(6, (1..6).map(|i| (0, i))).unwrap();
        let center = SocialNetwork::canonical(&g, &[(0, 0.2), (3, 1.0)], 0.5).unwrap();
        let o = tree_oracle(&center, 0, 3).unwrap();
        for a in [1, 2, 4, 5] {
            assert_eq!(o.mean[a], 0.2);
        }
        let leaves = SocialNetwork::canonical(&g, &[(1, 0.0), (2, 1.0)], 0.5).unwrap();
        let o = tree_oracle(&leaves, 1, 2).unwrap();
        for a in [0, 3, 4, 5] {
            assert_eq!(o.mean[a], 0.5);
        }
    }

    #[test]
    fn tree_oracle_rejects_cycles() {
        let g = UndirectedGraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let net = SocialNetwork::canonical(&g, &[(0, 0.0), (2, 1.0)], 1.0).unwrap();
        assert!(matches!(
            tree_oracle(&net, 0, 2),
            Err(Error::OraclePrecondition(_))
        ));
    }

    #[test]
    fn barbell_twelve_values() {
        let o = barbell_oracle(12, 0.0, 1.0).unwrap();
        assert!((o[6] - 0.8).abs() < 1e-15);
        assert!((o[8] - 0.9).abs() < 1e-15);
        assert!((o[5] - 0.2).abs() < 1e-15);
        let net =
            SocialNetwork::canonical(&barbell(12).unwrap(), &[(0, 0.0), (11, 1.0)], 0.5).unwrap();
        let m = expected_beliefs(&net).unwrap();
        for v in 0..12 {
            assert!((m[v] - o[v]).abs() < 1e-12);
        }
        assert!(barbell_oracle(12, 3.0, 3.0)
            .unwrap()
            .iter()
            .all(|&v| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn ring_cayley_matches_solver() {
        let gens = unit_generators(1);
        let o = cayley_oracle(5, 1, &gens, 0, 2).unwrap();
        let g = cayley_torus(5, 1, &gens).unwrap();
        let net = SocialNetwork::canonical(&g, &[(0, 0.0), (2, 1.0)], 1.0).unwrap();
        let gamma = hitting_gamma(&net).unwrap();
        for a in 0..5 {
            assert!(
                (o[a] - gamma.get(a, 2)).abs() < 1e-10,
                "{a}: {} vs {}",
                o[a],
                gamma.get(a, 2)
            );
        }
        assert!((o[2] - 1.0).abs() < 1e-12);
        assert!(o[0].abs() < 1e-12);
    }

    #[test]
    fn torus_symmetric_point_is_half() {
        let gens = unit_generators(2);
        let s0 = torus_index(&[0, 0], 5);
        let s1 = torus_index(&[2, 2], 5);
        let a = torus_index(&[1, 1], 5);
        let o = cayley_oracle(5, 2, &gens, s0, s1).unwrap();
        // a - s1 = s0 - a
        assert!((o[a] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cycle_hitting_time() {
        // E_0[T_k] on a cycle of length m is k (m - k)
        let t = cayley_hitting_time(7, 1, &unit_generators(1), 0, 3).unwrap();
        assert!((t - 12.0).abs() < 1e-9);
    }

    #[test]
    fn brute_force_agrees() {
        let g = UndirectedGraph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let net = SocialNetwork::canonical(&g, &[(0, 0.0), (4, 1.0)], 0.5).unwrap();
        let (bf, left) = brute_force_gamma(&net, 1e-14).unwrap();
        assert!(left < 1e-14);
        let gamma = hitting_gamma(&net).unwrap();
        assert!((bf - gamma.matrix()).abs().max() < 1e-12);
    }
}
