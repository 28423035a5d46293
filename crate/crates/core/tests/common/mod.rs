//! Shared corpus of test networks and the invariant checks run over it.
#![allow(dead_code)]

use gossipfield::fluidity::{concentration_report, fluidity, FluidityReport};
use gossipfield::generators::{
    configuration_multigraph, generate, generate_graph, DegreeLaw, Family, GraphRecipe, Placement,
};
use gossipfield::moments::oracles::{barbell_oracle, brute_force_gamma, cayley_oracle, tree_oracle};
use gossipfield::moments::{
    backward_derivative_norm, backward_ode_trajectory, expected_beliefs, expected_beliefs_direct,
    harmonic_residual, hitting_gamma, moments, unit_trust_variances,
};
use gossipfield::rng::split;
use gossipfield::simulate::{
    simulate_forward, BoundsObserver, ErgodicAccumulator, EventLog, DEFAULT_BATCHES,
};
use gossipfield::{Error, NetworkBuilder, SocialNetwork, UndirectedGraph};
use nalgebra::SymmetricEigen;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

pub enum Oracle {
    None,
    Tree {
        s0: usize,
        s1: usize,
    },
    Barbell {
        n: usize,
    },
    Cayley {
        m: usize,
        d: usize,
        gens: Vec<Vec<i64>>,
        s0: usize,
        s1: usize,
    },
}

pub struct Case {
    pub name: String,
    pub net: SocialNetwork,
    pub oracle: Oracle,
    /// Built by the canonical construction.
    pub canonical: bool,
}

impl Case {
    fn new(name: &str, net: SocialNetwork, oracle: Oracle, canonical: bool) -> Self {
        Case {
            name: name.to_string(),
            net,
            oracle,
            canonical,
        }
    }
}

/// One regular agent between stubborn agents at 0 and 1, both edges at rate 1/2.
pub fn single_agent(theta: f64) -> SocialNetwork {
    let mut b = NetworkBuilder::new();
    b.regular("a").unwrap();
    b.stubborn("s0", 0.0).unwrap();
    b.stubborn("s1", 1.0).unwrap();
    b.edge("a", "s0", 0.5, theta).unwrap();
    b.edge("a", "s1", 0.5, theta).unwrap();
    b.build().unwrap()
}

pub fn path(n: usize) -> UndirectedGraph {
    UndirectedGraph::new(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
}

pub fn complete(n: usize) -> UndirectedGraph {
    UndirectedGraph::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).unwrap()
}

/// Canonical line with stubborn ends.
pub fn line(n: usize, trust: f64, x0: f64, x1: f64) -> SocialNetwork {
    SocialNetwork::canonical(&path(n), &[(0, x0), (n - 1, x1)], trust).unwrap()
}

/// Canonical network from a random recipe. Placements whose regular part is
/// disconnected have no reversible extension; those are redrawn with the next
/// seed.
pub fn seeded(family: Family, placement: Placement, seed: u64, beliefs: &[f64], trust: f64) -> (SocialNetwork, Vec<usize>) {
    for k in 0..100 {
        let g = generate(&GraphRecipe {
            family: family.clone(),
            placement: placement.clone(),
            seed: seed + k,
        })
        .unwrap();
        let net = g.canonical(beliefs, trust).unwrap();
        match net.reversible_extension() {
            Ok(_) => return (net, g.stubborn),
            Err(Error::Reducible) => continue,
            Err(e) => panic!("{e}"),
        }
    }
    panic!("no placement with a connected regular part");
}

fn heterogeneous() -> SocialNetwork {
    let mut b = NetworkBuilder::new();
    for r in ["a", "b", "c", "d", "e"] {
        b.regular(r).unwrap();
    }
    b.stubborn("s", 0.0).unwrap();
    b.stubborn("t", 1.0).unwrap();
    b.stubborn("u", -0.5).unwrap();
    for (from, to, rate, trust) in [
        ("a", "b", 2.0, 0.3),
        ("b", "a", 0.5, 0.9),
        ("b", "c", 1.0, 0.6),
        ("c", "d", 0.7, 1.0),
        ("d", "c", 0.2, 0.4),
        ("d", "e", 1.3, 0.5),
        ("e", "a", 0.4, 0.8),
        ("e", "d", 0.3, 1.0),
        ("a", "s", 0.6, 0.5),
        ("c", "t", 1.1, 0.7),
        ("e", "u", 0.9, 0.2),
    ] {
        b.edge(from, to, rate, trust).unwrap();
    }
    b.build().unwrap()
}

/// The fixed corpus: 11 deterministic networks and 9 from seeded random families.
pub fn corpus() -> Vec<Case> {
    let mut cases = vec![
        Case::new("single agent θ=1/2", single_agent(0.5), Oracle::None, false),
        Case::new("single agent θ=1", single_agent(1.0), Oracle::None, false),
        Case::new(
            "line n=4 θ=1/2",
            line(4, 0.5, 0.0, 1.0),
            Oracle::Tree { s0: 0, s1: 3 },
            true,
        ),
        Case::new(
            "line n=5 θ=1",
            line(5, 1.0, 0.0, 1.0),
            Oracle::Tree { s0: 0, s1: 4 },
            true,
        ),
        Case::new(
            "line n=7 three stubborn",
            SocialNetwork::canonical(&path(7), &[(0, -1.0), (3, 0.5), (6, 2.0)], 0.7).unwrap(),
            Oracle::None,
            true,
        ),
        Case::new(
            "star n=6 stubborn leaves",
            SocialNetwork::canonical(
                &UndirectedGraph::new(6, (1..6).map(|v| (0, v))).unwrap(),
                &[(1, 0.0), (2, 1.0)],
                0.5,
            )
            .unwrap(),
            Oracle::Tree { s0: 1, s1: 2 },
            true,
        ),
        Case::new(
            "barbell n=12",
            SocialNetwork::canonical(
                &gossipfield::generators::barbell(12).unwrap(),
                &[(0, 0.0), (11, 1.0)],
                1.0,
            )
            .unwrap(),
            Oracle::Barbell { n: 12 },
            true,
        ),
        Case::new(
            "cycle m=8",
            torus(8, 1, None, &[(0, 0.0), (1, 1.0)], 0.5),
            Oracle::Cayley {
                m: 8,
                d: 1,
                gens: vec![vec![1], vec![-1]],
                s0: 0,
                s1: 1,
            },
            true,
        ),
        Case::new(
            "torus m=5 d=2",
            torus(5, 2, None, &[(0, 0.0), (12, 1.0)], 1.0),
            Oracle::Cayley {
                m: 5,
                d: 2,
                gens: vec![vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]],
                s0: 0,
                s1: 12,
            },
            true,
        ),
        Case::new(
            "cayley m=7 ±1 ±2",
            torus(
                7,
                1,
                Some(vec![vec![1], vec![-1], vec![2], vec![-2]]),
                &[(0, 0.0), (3, 1.0)],
                0.8,
            ),
            Oracle::Cayley {
                m: 7,
                d: 1,
                gens: vec![vec![1], vec![-1], vec![2], vec![-2]],
                s0: 0,
                s1: 3,
            },
            true,
        ),
        Case::new(
            "complete n=6",
            SocialNetwork::canonical(&complete(6), &[(0, 0.0), (1, 1.0)], 0.3).unwrap(),
            Oracle::None,
            true,
        ),
    ];

    let (net, s) = seeded(Family::Tree { n: 20 }, Placement::UniformRandom { count: 2 }, 3, &[0.0, 1.0], 1.0);
    cases.push(Case::new("random tree n=20", net, Oracle::Tree { s0: s[0], s1: s[1] }, true));

    let random: Vec<(&str, Family, Placement, u64, Vec<f64>, f64)> = vec![
        (
            "erdos-renyi n=30 c=2",
            Family::ErdosRenyi { n: 30, p: None, c: Some(2.0) },
            Placement::UniformRandom { count: 2 },
            5,
            vec![0.0, 1.0],
            0.5,
        ),
        (
            "erdos-renyi n=40 p=0.15",
            Family::ErdosRenyi { n: 40, p: Some(0.15), c: None },
            Placement::UniformRandom { count: 3 },
            9,
            vec![0.0, 0.5, 1.0],
            1.0,
        ),
        (
            "config 3-regular n=24",
            Family::ConfigModel { n: 24, degrees: DegreeLaw::Regular { k: 3 } },
            Placement::UniformRandom { count: 2 },
            4,
            vec![0.0, 1.0],
            0.6,
        ),
        (
            "config power law n=30",
            Family::ConfigModel { n: 30, degrees: DegreeLaw::PowerLaw { m: 2, max: 10 } },
            Placement::UniformRandom { count: 2 },
            6,
            vec![-1.0, 1.0],
            1.0,
        ),
        (
            "preferential attachment n=30",
            Family::PreferentialAttachment { n: 30, m: 2 },
            Placement::First { count: 2 },
            8,
            vec![0.0, 1.0],
            0.5,
        ),
        (
            "newman-watts n=30",
            Family::NewmanWatts { n: 30, k: 2, p: 0.1 },
            Placement::UniformRandom { count: 2 },
            2,
            vec![0.0, 1.0],
            1.0,
        ),
        (
            "torus m=3 d=3 three stubborn",
            Family::CayleyTorus { m: 3, d: 3, generators: None },
            Placement::UniformRandom { count: 3 },
            1,
            vec![0.0, 0.25, 1.0],
            0.4,
        ),
    ];
    for (name, family, placement, seed, beliefs, trust) in random {
        let (net, _) = seeded(family, placement, seed, &beliefs, trust);
        cases.push(Case::new(name, net, Oracle::None, true));
    }
    cases.push(Case::new("heterogeneous directed", heterogeneous(), Oracle::None, false));
    assert_eq!(cases.len(), 20);
    cases
}

fn torus(m: usize, d: usize, gens: Option<Vec<Vec<i64>>>, stubborn: &[(usize, f64)], trust: f64) -> SocialNetwork {
    let (g, _) = generate_graph(&Family::CayleyTorus { m, d, generators: gens }, 0).unwrap();
    SocialNetwork::canonical(&g, stubborn, trust).unwrap()
}

// ---------------------------------------------------------------------------
// statistics

/// Two-sided tail probability of a single 3σ z-test.
pub fn three_sigma_alpha() -> f64 {
    2.0 * (1.0 - Normal::standard().cdf(3.0))
}

/// Critical |z| so that `tests` simultaneous z-tests have the family-wise
/// level of one 3σ test.
pub fn bonferroni_z(tests: usize) -> f64 {
    let alpha = three_sigma_alpha() / tests.max(1) as f64;
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance and its large-sample standard error `sqrt((μ₄ - σ⁴)/N)`.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2).max(0.0) / n).sqrt())
}

/// Kolmogorov–Smirnov distance to the uniform law on `[0, 1]`.
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x.clamp(0.0, 1.0);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// A batch of z-tests judged together.
#[derive(Default)]
pub struct ZTests {
    entries: Vec<(String, f64, f64, f64)>,
}

impl ZTests {
    pub fn push(&mut self, label: String, estimate: f64, exact: f64, se: f64) {
        self.entries.push((label, estimate, exact, se));
    }

    pub fn extend(&mut self, other: ZTests) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    fn z(e: &(String, f64, f64, f64)) -> f64 {
        let gap = (e.1 - e.2).abs();
        if e.3 > 0.0 {
            gap / e.3
        } else if gap <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn max_z(&self) -> f64 {
        self.entries.iter().map(Self::z).fold(0.0, f64::max)
    }

    /// Entries beyond `limit` standard errors.
    pub fn failures(&self, limit: f64) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| !(Self::z(e) <= limit))
            .map(|e| format!("{}: {:.6} vs {:.6} (z = {:.2})", e.0, e.1, e.2, Self::z(e)))
            .collect()
    }

    pub fn bonferroni_failures(&self) -> Vec<String> {
        self.failures(bonferroni_z(self.len()))
    }
}

// ---------------------------------------------------------------------------
// invariant checks; each returns a list of violations

macro_rules! check {
    ($out:expr, $cond:expr, $($fmt:tt)+) => {
        if !$cond {
            $out.push(format!($($fmt)+));
        }
    };
}

pub fn network_invariants(case: &Case) -> Vec<String> {
    let mut out = Vec::new();
    let net = &case.net;
    let n = net.n();
    let name = &case.name;
    let q = net.generator_q();
    for v in 0..n {
        check!(out, q.matrix().row_sum(v).abs() < 1e-12, "{name}: Q row {v} sum {:e}", q.matrix().row_sum(v));
        for (w, x) in q.matrix().row(v) {
            check!(out, w == v || x >= 0.0, "{name}: Q[{v},{w}] = {x}");
            check!(out, !net.is_stubborn(v) || x == 0.0, "{name}: stubborn row {v} nonzero");
        }
    }
    let p = net.jump_p();
    for &a in net.regular() {
        let sum = p.matrix().row_sum(a);
        check!(out, (sum - 1.0).abs() < 1e-12, "{name}: P row {a} sums to {sum}");
        for (w, x) in p.matrix().row(a) {
            check!(out, (0.0..=1.0).contains(&x), "{name}: P[{a},{w}] = {x}");
        }
    }
    if case.canonical {
        let g = net.undirected();
        for &a in net.regular() {
            let d = g.degree(a) as f64;
            for &v in g.neighbors(a) {
                check!(out, p.get(a, v) == 1.0 / d, "{name}: P[{a},{v}] = {} not 1/{d}", p.get(a, v));
            }
        }
    }
    let k = net.coupled_k();
    let unit = net.has_unit_trust();
    for v in 0..n {
        for v2 in 0..n {
            let row = k.row(v, v2);
            let sum: f64 = row.iter().map(|e| e.1).sum();
            check!(out, sum.abs() < 1e-12, "{name}: K row ({v},{v2}) sums to {sum:e}");
            for &((w, w2), x) in &row {
                check!(out, (w, w2) == (v, v2) || x >= 0.0, "{name}: K[({v},{v2}),({w},{w2})] = {x}");
                check!(
                    out,
                    !(unit && v == v2 && w != w2 && x != 0.0),
                    "{name}: coalesced pair ({v},{v}) splits"
                );
            }
            if v != v2 {
                for w in (0..n).filter(|&w| w != v) {
                    let marginal: f64 = row.iter().filter(|e| e.0 .0 == w).map(|e| e.1).sum();
                    check!(
                        out,
                        (marginal - q.get(v, w)).abs() < 1e-12,
                        "{name}: K marginal ({v},{v2})->{w} = {marginal} vs Q {}",
                        q.get(v, w)
                    );
                }
            }
        }
    }
    if let Ok(ext) = net.reversible_extension() {
        check!(out, ext.detailed_balance_violation() < 1e-10, "{name}: detailed balance {:e}", ext.detailed_balance_violation());
        check!(out, ext.stationarity_violation() < 1e-10, "{name}: πP ≠ π by {:e}", ext.stationarity_violation());
        let total: f64 = ext.pi().iter().sum();
        check!(out, (total - 1.0).abs() < 1e-12 && ext.pi().iter().all(|&x| x >= 0.0), "{name}: π not a distribution");
    } else if case.canonical {
        // only a disconnected regular part, or a stubborn agent with no
        // regular neighbour, may block the extension
        let e = net.reversible_extension().unwrap_err();
        check!(
            out,
            matches!(e, Error::Reducible | Error::IsolatedStubborn(_)),
            "{name}: no reversible extension: {e}"
        );
    }
    out
}

pub fn moment_invariants(case: &Case) -> Vec<String> {
    let mut out = Vec::new();
    let net = &case.net;
    let name = &case.name;
    let n = net.n();
    let (lo, hi) = net.belief_hull();
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));

    let gamma = hitting_gamma(net).unwrap();
    for v in 0..n {
        let row = gamma.row(v);
        let sum: f64 = row.iter().sum();
        check!(out, row.iter().all(|&g| g >= -1e-12) && (sum - 1.0).abs() < 1e-10, "{name}: γ row {v} = {row:?}");
    }
    for &s in net.stubborn() {
        check!(out, gamma.get(s, s) == 1.0, "{name}: γ^s_s ≠ 1 at {s}");
    }

    let sol = moments(net).unwrap();
    let direct = expected_beliefs_direct(net).unwrap();
    for v in 0..n {
        check!(out, sol.mean[v] >= lo - slack && sol.mean[v] <= hi + slack, "{name}: mean {v} = {} outside hull", sol.mean[v]);
        check!(out, (sol.mean[v] - direct[v]).abs() < 1e-10, "{name}: mean paths differ at {v}");
        check!(out, sol.variance[v] >= -1e-12, "{name}: variance {v} = {:e}", sol.variance[v]);
        if net.is_stubborn(v) {
            check!(out, sol.variance[v] == 0.0, "{name}: stubborn {v} variance {}", sol.variance[v]);
        }
        for w in 0..n {
            if let Some(c) = sol.correlation(v, w) {
                check!(out, (-1.0 - 1e-9..=1.0 + 1e-9).contains(&c), "{name}: corr({v},{w}) = {c}");
            }
        }
    }
    check!(out, harmonic_residual(net, &sol.mean) < 1e-10, "{name}: harmonic residual {:e}", harmonic_residual(net, &sol.mean));
    let via_gamma = expected_beliefs(net).unwrap();
    let dual_gap = via_gamma.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check!(out, dual_gap < 1e-10, "{name}: γ-weighted and direct means differ by {dual_gap:e}");

    let mm = sol.second_moment_matrix().unwrap();
    let asym = (&mm - mm.transpose()).abs().max();
    check!(out, asym < 1e-12, "{name}: E[XXᵀ] asymmetric by {asym:e}");
    let low = SymmetricEigen::new(mm.clone()).eigenvalues.min();
    check!(out, low >= -1e-9, "{name}: E[XXᵀ] eigenvalue {low:e}");

    if net.has_unit_trust() {
        let v2 = unit_trust_variances(net, &gamma).unwrap();
        let gap = v2.iter().zip(&sol.variance).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        check!(out, gap < 1e-8, "{name}: coalescing variances differ from the pair system by {gap:e}");
    }

    if n <= gossipfield::moments::oracles::BRUTE_FORCE_MAX {
        let (bf, tail) = brute_force_gamma(net, 1e-14).unwrap();
        let gap = (&bf - gamma.matrix()).abs().max();
        check!(out, gap < 1e-8 && tail < 1e-8, "{name}: brute-force γ differs by {gap:e}");
    }

    for gap in oracle_gaps(case) {
        check!(out, gap.1 < 1e-8, "{name}: {} oracle differs by {:e}", gap.0, gap.1);
    }

    // the backward equations contract towards the stationary moments
    let x0: Vec<f64> = (0..n).map(|v| net.belief(v).unwrap_or(if v % 2 == 0 { lo } else { hi })).collect();
    let times = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let states = backward_ode_trajectory(net, &x0, None, &times).unwrap();
    // the integrator's local tolerance is relative to the size of E[X²]
    let tol = 1e-8 * (1.0 + lo.abs().max(hi.abs()).powi(2));
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for st in &states {
        let residual = backward_derivative_norm(net, &st.mean, &st.second).unwrap();
        let dist = st.mean.iter().zip(&sol.mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max).max((&st.second - &mm).abs().max());
        check!(
            out,
            residual <= prev.0 + tol && dist <= prev.1 + tol,
            "{name}: backward ODE not contracting at t = {}: residual {residual:e} after {:e}, distance {dist:e} after {:e}",
            st.t,
            prev.0,
            prev.1
        );
        prev = (residual, dist);
    }
    out
}

/// `(label, max entrywise gap)` between the generic solver and the case's oracle.
pub fn oracle_gaps(case: &Case) -> Vec<(&'static str, f64)> {
    let net = &case.net;
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    match &case.oracle {
        Oracle::None => vec![],
        Oracle::Tree { s0, s1 } => {
            let o = tree_oracle(net, *s0, *s1).unwrap();
            let sol = moments(net).unwrap();
            let mut gaps = vec![("tree mean", sup(&o.mean, &sol.mean))];
            if let Some(v) = &o.variance {
                gaps.push(("tree variance", sup(v, &sol.variance)));
            }
            gaps
        }
        Oracle::Barbell { n } => {
            let o = barbell_oracle(*n, net.belief(0).unwrap(), net.belief(n - 1).unwrap()).unwrap();
            vec![("barbell mean", sup(&o, &expected_beliefs(net).unwrap()))]
        }
        Oracle::Cayley { m, d, gens, s0, s1 } => {
            let o = cayley_oracle(*m, *d, gens, *s0, *s1).unwrap();
            let gamma = hitting_gamma(net).unwrap();
            let col: Vec<f64> = (0..net.n()).map(|v| gamma.get(v, *s1)).collect();
            vec![("cayley γ", sup(&o, &col))]
        }
    }
}

/// Agents whose influencing stubborn agents hold at least two distinct beliefs.
pub fn mixed_influence(net: &SocialNetwork) -> Vec<usize> {
    net.regular()
        .iter()
        .copied()
        .filter(|&a| {
            let mut b: Vec<f64> = net.influence_set(a).iter().map(|&s| net.belief(s).unwrap()).collect();
            b.sort_by(f64::total_cmp);
            b.dedup();
            b.len() >= 2
        })
        .collect()
}

pub fn nondegeneracy(case: &Case) -> Vec<String> {
    let sol = moments(&case.net).unwrap();
    mixed_influence(&case.net)
        .into_iter()
        .filter(|&a| !(sol.variance[a] > 0.0))
        .map(|a| format!("{}: agent {a} has variance {}", case.name, sol.variance[a]))
        .collect()
}

pub fn fluidity_invariants(case: &Case) -> Vec<String> {
    let mut out = Vec::new();
    let net = &case.net;
    let name = &case.name;
    let Ok(ext) = net.reversible_extension() else {
        return out;
    };
    let report = fluidity(net).unwrap();
    check!(out, report.tau2 <= report.tau + 1e-3, "{name}: τ₂ = {} > τ = {}", report.tau2, report.tau);
    check!(out, report.recompute_fluidity().to_bits() == report.fluidity.to_bits(), "{name}: Φ not reproducible");
    if report.conductance.exact {
        let bound = 1.0 / (4.0 * report.conductance.value);
        check!(out, report.tau >= bound - 1e-3, "{name}: τ = {} below 1/(4φ) = {bound}", report.tau);
    }
    check!(
        out,
        report.hitting_time >= report.hitting_time_lower_bound - 1e-9,
        "{name}: E_π[T_S] = {} below {}",
        report.hitting_time,
        report.hitting_time_lower_bound
    );
    check!(out, report.delta_star >= 0.0, "{name}: Δ* < 0");

    let gamma = hitting_gamma(net).unwrap();
    let sum: f64 = report.gamma_bar.iter().sum();
    check!(out, (sum - 1.0).abs() < 1e-10 && report.gamma_bar.iter().all(|&g| g >= -1e-12), "{name}: γ̄ = {:?}", report.gamma_bar);
    for (j, &s) in net.stubborn().iter().enumerate() {
        let direct: f64 = (0..net.n()).map(|v| ext.pi()[v] * gamma.get(v, s)).sum();
        check!(out, (direct - report.gamma_bar[j]).abs() < 1e-12, "{name}: γ̄_{s} = {} vs {direct}", report.gamma_bar[j]);
    }

    let eps = [0.05, 0.1, 0.2];
    let unit = net.has_unit_trust();
    let conc = concentration_report(net, &eps, unit).unwrap();
    check!(out, conc.applicable == (report.pi_stubborn <= 0.25), "{name}: applicability flag wrong");
    for row in &conc.rows {
        let fracs = [Some(row.mean_violation), row.variance_violation];
        check!(out, fracs.iter().flatten().all(|f| (0.0..=1.0).contains(f)), "{name}: fraction out of [0,1]");
    }
    check!(out, conc.bound_respected(), "{name}: concentration bound violated: {:?}", conc.rows);

    // affine change of beliefs
    let (alpha, beta) = (-2.5, 0.7);
    let mapped = net.map_beliefs(|x| alpha * x + beta).unwrap();
    let r2 = fluidity(&mapped).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * (1.0 + b.abs());
    check!(out, close(r2.mean_z, alpha * report.mean_z + beta), "{name}: E[Z] not equivariant");
    check!(out, close(r2.var_z, alpha * alpha * report.var_z), "{name}: σ_Z² not equivariant");
    check!(out, close(r2.delta_star, alpha.abs() * report.delta_star), "{name}: Δ* not equivariant");
    let m1 = expected_beliefs(net).unwrap();
    let m2 = expected_beliefs(&mapped).unwrap();
    let scale = 1.0 + report.mean_z.abs() + report.delta_star;
    for &e in &eps {
        // agents within rounding of the threshold may fall either way
        let clear: Vec<usize> = (0..m1.len())
            .filter(|&v| ((m1[v] - report.mean_z).abs() - report.delta_star * e).abs() > 1e-9 * scale)
            .collect();
        let side = |r: &FluidityReport, m: &[f64]| -> Vec<bool> {
            clear.iter().map(|&v| (m[v] - r.mean_z).abs() > r.delta_star * e).collect()
        };
        check!(out, side(&report, &m1) == side(&r2, &m2), "{name}: violating set changed at ε = {e}");
    }
    out
}

/// Ergodic averages of one forward run against the exact moments. Returns
/// the z-tests and any hard violations (hull, non-degeneracy, seeding).
pub fn simulation_checks(case: &Case, horizon: f64, seed: u64) -> (ZTests, Vec<String>) {
    let mut out = Vec::new();
    let mut z = ZTests::default();
    let net = &case.net;
    let name = &case.name;
    let (lo, hi) = net.belief_hull();
    let x0: Vec<f64> = (0..net.n()).map(|v| net.belief(v).unwrap_or(lo)).collect();
    let mut pairs: Vec<(usize, usize)> = net.regular().iter().map(|&a| (a, a)).collect();
    pairs.extend(
        net.edges()
            .iter()
            .filter(|e| !net.is_stubborn(e.to) && e.from < e.to)
            .map(|e| (e.from, e.to))
            .take(12),
    );
    let mut acc = ErgodicAccumulator::new(&x0, 0.0, horizon, &pairs, DEFAULT_BATCHES).unwrap();
    let mut bounds = BoundsObserver::new(net);
    simulate_forward(net, &x0, horizon, seed, &mut [&mut acc, &mut bounds]).unwrap();
    check!(out, bounds.violations() == 0, "{name}: {} updates left the hull", bounds.violations());

    let sol = moments(net).unwrap();
    for &a in net.regular() {
        let m = acc.mean(a);
        check!(out, m >= lo - 1e-12 && m <= hi + 1e-12, "{name}: time-average of {a} outside hull");
        z.push(format!("{name}: mean {a}"), m, sol.mean[a], acc.mean_se(a));
    }
    for &(v, w) in &pairs {
        let exact = sol.covariance(v, w).unwrap();
        z.push(format!("{name}: cov ({v},{w})"), acc.covariance(v, w).unwrap(), exact, acc.covariance_se(v, w).unwrap());
    }
    for a in mixed_influence(net) {
        let v = acc.variance(a).unwrap();
        check!(out, v > sol.variance[a] / 2.0, "{name}: time-averaged variance of {a} is {v}, exact {}", sol.variance[a]);
    }

    let log = |s: u64| {
        let mut l = EventLog::default();
        simulate_forward(net, &x0, 20.0, s, &mut [&mut l]).unwrap();
        l.events().to_vec()
    };
    check!(out, log(seed) == log(seed), "{name}: same seed, different events");
    check!(out, log(seed) != log(seed + 1), "{name}: different seeds, same events");
    (z, out)
}

// ---------------------------------------------------------------------------
// generator statistics

pub fn random_recipes() -> Vec<GraphRecipe> {
    let r = |family, placement, seed| GraphRecipe { family, placement, seed };
    vec![
        r(Family::Tree { n: 40 }, Placement::UniformRandom { count: 3 }, 1),
        r(Family::ErdosRenyi { n: 60, p: None, c: Some(2.0) }, Placement::UniformRandom { count: 2 }, 2),
        r(Family::ConfigModel { n: 50, degrees: DegreeLaw::PowerLaw { m: 2, max: 20 } }, Placement::Center, 3),
        r(Family::PreferentialAttachment { n: 80, m: 3 }, Placement::Last { count: 2 }, 4),
        r(Family::NewmanWatts { n: 60, k: 2, p: 0.2 }, Placement::UniformRandom { count: 4 }, 5),
    ]
}

pub fn recipe_determinism() -> Vec<String> {
    let mut out = Vec::new();
    for recipe in random_recipes() {
        let a = generate(&recipe).unwrap();
        let b = generate(&recipe).unwrap();
        check!(out, a.graph.edges() == b.graph.edges() && a.stubborn == b.stubborn, "{:?}: not reproducible", recipe.family);
        let c = generate(&GraphRecipe { seed: recipe.seed + 100, ..recipe.clone() }).unwrap();
        check!(out, a.graph.edges() != c.graph.edges(), "{:?}: seed ignored", recipe.family);
    }
    out
}

/// The stub matching realises the prescribed degrees exactly, loops counted twice.
pub fn configuration_degrees() -> Vec<String> {
    let mut out = Vec::new();
    for seed in 0..20u64 {
        let mut rng = split(seed, 77);
        let degrees: Vec<usize> = (0..30).map(|v| 1 + (v * 7 + seed as usize) % 6).collect();
        let mut degrees = degrees;
        if degrees.iter().sum::<usize>() % 2 == 1 {
            degrees[0] += 1;
        }
        let edges = configuration_multigraph(&degrees, &mut rng);
        let mut got = vec![0; degrees.len()];
        for (u, v) in edges {
            got[u] += 1;
            got[v] += 1;
        }
        check!(out, got == degrees, "seed {seed}: degree multiset {got:?} vs {degrees:?}");
    }
    // odd totals are redrawn
    for seed in 0..10 {
        let law = DegreeLaw::PowerLaw { m: 2, max: 9 };
        let (_, stats) = generate_graph(&Family::ConfigModel { n: 41, degrees: law }, seed).unwrap();
        let total: usize = stats.prescribed_degrees.unwrap().iter().sum();
        check!(out, total % 2 == 0, "seed {seed}: odd degree total {total}");
    }
    out
}

/// Degree CCDF of a preferential-attachment graph against
/// `P(D ≥ k) = m(m+1) / (k(k+1))`, within a factor of 3 on `[m, 50]`.
pub fn preferential_attachment_tail(n: usize, m: usize, seed: u64) -> Vec<String> {
    let (g, _) = generate_graph(&Family::PreferentialAttachment { n, m }, seed).unwrap();
    let degrees = g.degrees();
    let mut out = Vec::new();
    for k in m..=50 {
        let empirical = degrees.iter().filter(|&&d| d >= k).count() as f64 / n as f64;
        let law = (m * (m + 1)) as f64 / (k * (k + 1)) as f64;
        let ratio = empirical / law;
        check!(out, (1.0 / 3.0..=3.0).contains(&ratio), "k = {k}: CCDF {empirical:.5} vs {law:.5}");
    }
    out
}

/// Chi-square goodness of fit of Newman–Watts shortcut counts to
/// `Poisson(p k n)` across seeds. Returns the p-value.
pub fn newman_watts_shortcuts(n: usize, k: usize, p: f64, seeds: u64) -> f64 {
    let lambda = p * k as f64 * n as f64;
    let counts: Vec<u64> = (0..seeds)
        .map(|s| {
            let (_, stats) = generate_graph(&Family::NewmanWatts { n, k, p }, s).unwrap();
            stats.shortcuts.unwrap() as u64
        })
        .collect();
    let law = Poisson::new(lambda).unwrap();
    let total = seeds as f64;
    // pool outcomes into cells with expected count at least 5
    let mut cells: Vec<(u64, u64, f64)> = Vec::new();
    let (mut start, mut mass) = (0u64, 0.0);
    let top = (lambda + 10.0 * lambda.sqrt()) as u64 + 10;
    for j in 0..=top {
        mass += law.pmf(j);
        if mass * total >= 5.0 {
            cells.push((start, j, mass));
            start = j + 1;
            mass = 0.0;
        }
    }
    // the last cell absorbs the tail
    let head: f64 = cells[..cells.len() - 1].iter().map(|c| c.2).sum();
    let last = cells.last_mut().unwrap();
    last.1 = u64::MAX;
    last.2 = 1.0 - head;
    let stat: f64 = cells
        .iter()
        .map(|&(a, b, q)| {
            let observed = counts.iter().filter(|&&c| c >= a && c <= b).count() as f64;
            let expected = q * total;
            (observed - expected).powi(2) / expected
        })
        .sum();
    let df = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}
