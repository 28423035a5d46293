//! Deterministic and random graph families, and stubborn-agent placement.
//!
//! Every random draw comes from [`crate::rng::split`] on the recipe seed:
//! the graph uses stream [`streams::GRAPH`], placement uses
//! [`streams::PLACEMENT`]. Generating the same recipe twice gives the same
//! edge list bit for bit.
//!
//! Multigraph families (configuration model, preferential attachment) drop
//! self-loops and collapse parallel edges after generation, so realized
//! degrees can sit slightly below the prescribed ones. The number of
//! discarded edges is reported in [`GenerationStats`].

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SimplifyStats, UndirectedGraph};
use crate::network::SocialNetwork;
use crate::rng::{split, streams, SimRng};

/// Maximum number of draws for random families that must come out connected.
pub const CONNECTIVITY_RETRIES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Path `0 - 1 - ... - (n-1)`.
    Line { n: usize },
    /// Node 0 joined to every other node.
    Star { n: usize },
    /// Uniform random labelled tree (Prüfer code).
    Tree { n: usize },
    /// Cliques on `0..n/2` and `n/2..n` joined by the edge `{n/2 - 1, n/2}`.
    Barbell { n: usize },
    /// Cayley graph of `Z_m^d`. Node `x` has index `Σ x_i m^i`.
    /// Without `generators` the set is `{±e_1, ..., ±e_d}`.
    CayleyTorus {
        m: usize,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generators: Option<Vec<Vec<i64>>>,
    },
    /// `G(n, p)`; give either `p` or `c` for `p = c ln(n) / n`.
    ErdosRenyi {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    /// I.i.d. degrees from `degrees`, stubs matched uniformly.
    ConfigModel { n: usize, degrees: DegreeLaw },
    /// Start from two nodes joined by `m` parallel edges; every new node
    /// sends `m` edges to existing nodes chosen proportionally to degree.
    PreferentialAttachment { n: usize, m: usize },
    /// Ring with offsets `±1..±k` plus `Poisson(p k n)` uniform shortcuts.
    NewmanWatts { n: usize, k: usize, p: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum DegreeLaw {
    /// Every node has degree `k`.
    Regular { k: usize },
    /// `P(d = k) ∝ weights[k]`.
    Pmf { weights: BTreeMap<usize, f64> },
    /// `P(d = k) ∝ 2m(m+1) / (k(k+1)(k+2))` for `m ≤ k ≤ max`.
    PowerLaw { m: usize, max: usize },
}

impl DegreeLaw {
    fn table(&self) -> Result<(Vec<usize>, Vec<f64>)> {
        let (ks, ws): (Vec<usize>, Vec<f64>) = match self {
            DegreeLaw::Regular { k } => (vec![*k], vec![1.0]),
            DegreeLaw::Pmf { weights } => weights.iter().map(|(&k, &w)| (k, w)).unzip(),
            DegreeLaw::PowerLaw { m, max } => {
                if *m == 0 || max < m {
                    return Err(Error::InvalidRecipe(format!(
                        "power law needs 1 <= m <= max, got m = {m}, max = {max}"
                    )));
                }
                (*m..=*max)
                    .map(|k| {
                        let kf = k as f64;
                        (
                            k,
                            2.0 * (*m as f64) * (*m as f64 + 1.0) / (kf * (kf + 1.0) * (kf + 2.0)),
                        )
                    })
                    .unzip()
            }
        };
        if ks.is_empty()
            || ws.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || ws.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidRecipe(
                "degree law needs non-negative weights with positive total".into(),
            ));
        }
        Ok((ks, ws))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    Explicit {
        ids: Vec<usize>,
    },
    /// `count` distinct nodes drawn uniformly.
    UniformRandom {
        count: usize,
    },
    /// Nodes `0` and `n - 1`.
    Extremes,
    /// A node of maximum degree (smallest id on ties).
    Center,
    /// The `count` lowest ids; for preferential attachment the oldest nodes.
    First {
        count: usize,
    },
    /// The `count` highest ids; for preferential attachment the newest nodes.
    Last {
        count: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecipe {
    #[serde(flatten)]
    pub family: Family,
    pub placement: Placement,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    /// Draws needed to get a connected graph.
    pub attempts: usize,
    pub discarded: SimplifyStats,
    /// Newman–Watts shortcut count drawn from the Poisson law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shortcuts: Option<usize>,
    /// Configuration-model degree sequence before simplification.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prescribed_degrees: Option<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct GeneratedGraph {
    pub graph: UndirectedGraph,
    /// Sorted ascending.
    pub stubborn: Vec<usize>,
    pub stats: GenerationStats,
}

impl GeneratedGraph {
    /// Canonical network on the generated graph. `beliefs[i]` goes to the
    /// `i`-th stubborn agent in ascending id order.
    pub fn canonical(&self, beliefs: &[f64], trust: f64) -> Result<SocialNetwork> {
        if beliefs.len() != self.stubborn.len() {
            return Err(Error::InvalidPlacement(format!(
                "{} beliefs for {} stubborn agents",
                beliefs.len(),
                self.stubborn.len()
            )));
        }
        let pairs: Vec<(usize, f64)> = self
            .stubborn
            .iter()
            .copied()
            .zip(beliefs.iter().copied())
            .collect();
        SocialNetwork::canonical(&self.graph, &pairs, trust)
    }
}

pub fn generate(recipe: &GraphRecipe) -> Result<GeneratedGraph> {
    let (graph, stats) = generate_graph(&recipe.family, recipe.seed)?;
    let stubborn = place_stubborn(&graph, &recipe.placement, recipe.seed)?;
    Ok(GeneratedGraph {
        graph,
        stubborn,
        stats,
    })
}

pub fn generate_graph(family: &Family, seed: u64) -> Result<(UndirectedGraph, GenerationStats)> {
    let mut rng = split(seed, streams::GRAPH);
    let mut stats = GenerationStats {
        attempts: 1,
        ..Default::default()
    };
    let graph = match *family {
        Family::Line { n } => {
            need(n >= 2, "line needs n >= 2")?;
            UndirectedGraph::new(n, (0..n - 1).map(|i| (i, i + 1)))?
        }
        Family::Star { n } => {
            need(n >= 2, "star needs n >= 2")?;
            UndirectedGraph::new(n, (1..n).map(|i| (0, i)))?
        }
        Family::Tree { n } => random_tree(n, &mut rng)?,
        Family::Barbell { n } => barbell(n)?,
        Family::CayleyTorus {
            m,
            d,
            ref generators,
        } => {
            let gens = match generators {
                Some(g) => g.clone(),
                None => unit_generators(d),
            };
            cayley_torus(m, d, &gens)?
        }
        Family::ErdosRenyi { n, p, c } => {
            let p = match (p, c) {
                (Some(p), None) => p,
                (None, Some(c)) => c * (n as f64).ln() / n as f64,
                _ => {
                    return Err(Error::InvalidRecipe(
                        "erdos_renyi needs exactly one of p, c".into(),
                    ))
                }
            };
            need(
                n >= 2 && (0.0..=1.0).contains(&p),
                "erdos_renyi needs n >= 2 and p in [0, 1]",
            )?;
            retry_connected(&mut stats, || Ok(erdos_renyi(n, p, &mut rng)))?
        }
        Family::ConfigModel { n, ref degrees } => {
            need(n >= 2, "config_model needs n >= 2")?;
            let (ks, ws) = degrees.table()?;
            need(
                ks.iter().any(|&k| k > 0),
                "config_model degree law must put mass on positive degrees",
            )?;
            let mut prescribed = Vec::new();
            let g = retry_connected(&mut stats, || {
                let degs = draw_even_degrees(n, &ks, &ws, &mut rng)?;
                let stubs = configuration_multigraph(&degs, &mut rng);
                prescribed = degs;
                let (g, discarded) = UndirectedGraph::simplify(n, stubs);
                Ok((g, discarded))
            })?;
            stats.prescribed_degrees = Some(prescribed);
            g
        }
        Family::PreferentialAttachment { n, m } => {
            need(
                n >= 2 && m >= 1,
                "preferential_attachment needs n >= 2 and m >= 1",
            )?;
            let (g, discarded) =
                UndirectedGraph::simplify(n, preferential_attachment_multigraph(n, m, &mut rng));
            stats.discarded = discarded;
            g
        }
        Family::NewmanWatts { n, k, p } => {
            need(k >= 1 && n > 2 * k, "newman_watts needs k >= 1 and n > 2k")?;
            need(p >= 0.0 && p.is_finite(), "newman_watts needs p >= 0")?;
            let (edges, shortcuts) = newman_watts_edges(n, k, p, &mut rng)?;
            let (g, discarded) = UndirectedGraph::simplify(n, edges);
            stats.discarded = discarded;
            stats.shortcuts = Some(shortcuts);
            g
        }
    };
    Ok((graph, stats))
}

fn need(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidRecipe(msg.to_string()))
    }
}

/// Redraws until connected, recording attempts and the last draw's discards.
fn retry_connected<F>(stats: &mut GenerationStats, mut draw: F) -> Result<UndirectedGraph>
where
    F: FnMut() -> Result<(UndirectedGraph, SimplifyStats)>,
{
    for attempt in 1..=CONNECTIVITY_RETRIES {
        let (g, discarded) = draw()?;
        if g.is_connected() {
            stats.attempts = attempt;
            stats.discarded = discarded;
            return Ok(g);
        }
        log::debug!("draw {attempt} disconnected, retrying");
    }
    Err(Error::ConnectivityNotAchieved {
        attempts: CONNECTIVITY_RETRIES,
    })
}

pub fn barbell(n: usize) -> Result<UndirectedGraph> {
    need(n >= 6 && n % 2 == 0, "barbell needs even n >= 6")?;
    let h = n / 2;
    let mut edges = Vec::new();
    for base in [0, h] {
        for i in base..base + h {
            for j in i + 1..base + h {
                edges.push((i, j));
            }
        }
    }
    edges.push((h - 1, h));
    UndirectedGraph::new(n, edges)
}

pub fn unit_generators(d: usize) -> Vec<Vec<i64>> {
    let mut gens = Vec::with_capacity(2 * d);
    for i in 0..d {
        for sign in [1, -1] {
            let mut g = vec![0; d];
            g[i] = sign;
            gens.push(g);
        }
    }
    gens
}

/// Coordinates of node `v` in `Z_m^d`.
pub fn torus_coords(v: usize, m: usize, d: usize) -> Vec<usize> {
    let mut x = Vec::with_capacity(d);
    let mut r = v;
    for _ in 0..d {
        x.push(r % m);
        r /= m;
    }
    x
}

pub fn torus_index(x: &[usize], m: usize) -> usize {
    x.iter().rev().fold(0, |acc, &c| acc * m + c)
}

/// Checks that `gens` is a symmetric generating set of `Z_m^d` without the
/// identity, and reduces it mod `m`.
pub fn normalize_generators(m: usize, d: usize, gens: &[Vec<i64>]) -> Result<Vec<Vec<usize>>> {
    need(m >= 2 && d >= 1, "cayley_torus needs m >= 2 and d >= 1")?;
    let mi = m as i64;
    let mut reduced: Vec<Vec<usize>> = Vec::new();
    for g in gens {
        need(g.len() == d, "generator dimension differs from d")?;
        let r: Vec<usize> = g.iter().map(|&c| c.rem_euclid(mi) as usize).collect();
        need(
            r.iter().any(|&c| c != 0),
            "generator set contains the identity",
        )?;
        if !reduced.contains(&r) {
            reduced.push(r);
        }
    }
    for g in &reduced {
        let inv: Vec<usize> = g.iter().map(|&c| (m - c) % m).collect();
        need(reduced.contains(&inv), "generator set is not symmetric")?;
    }
    // generating: the subgroup reached from 0 must be everything
    let n = m
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidRecipe("m^d overflows".into()))?;
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        let x = torus_coords(v, m, d);
        for g in &reduced {
            let y: Vec<usize> = x.iter().zip(g).map(|(a, b)| (a + b) % m).collect();
            let w = torus_index(&y, m);
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    need(count == n, "generator set does not generate the group")?;
    Ok(reduced)
}

pub fn cayley_torus(m: usize, d: usize, gens: &[Vec<i64>]) -> Result<UndirectedGraph> {
    let reduced = normalize_generators(m, d, gens)?;
    let n = m.pow(d as u32);
    let mut edges = Vec::new();
    for v in 0..n {
        let x = torus_coords(v, m, d);
        for g in &reduced {
            let y: Vec<usize> = x.iter().zip(g).map(|(a, b)| (a + b) % m).collect();
            let w = torus_index(&y, m);
            if v < w {
                edges.push((v, w));
            }
        }
    }
    Ok(UndirectedGraph::simplify(n, edges).0)
}

fn random_tree(n: usize, rng: &mut SimRng) -> Result<UndirectedGraph> {
    need(n >= 2, "tree needs n >= 2")?;
    if n == 2 {
        return UndirectedGraph::new(2, [(0, 1)]);
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: std::collections::BTreeSet<usize> =
        (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = leaves.pop_first().unwrap();
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let u = leaves.pop_first().unwrap();
    let v = leaves.pop_first().unwrap();
    edges.push((u, v));
    UndirectedGraph::new(n, edges)
}

fn erdos_renyi(n: usize, p: f64, rng: &mut SimRng) -> (UndirectedGraph, SimplifyStats) {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    (
        UndirectedGraph::new(n, edges).expect("simple by construction"),
        SimplifyStats::default(),
    )
}

fn draw_even_degrees(n: usize, ks: &[usize], ws: &[f64], rng: &mut SimRng) -> Result<Vec<usize>> {
    let dist = rand::distr::weighted::WeightedIndex::new(ws)
        .map_err(|e| Error::InvalidRecipe(format!("degree law: {e}")))?;
    for _ in 0..10_000 {
        let degs: Vec<usize> = (0..n).map(|_| ks[dist.sample(rng)]).collect();
        if degs.iter().sum::<usize>() % 2 == 0 {
            return Ok(degs);
        }
    }
    Err(Error::InvalidRecipe(
        "degree law never produced an even degree sum".into(),
    ))
}

/// Uniform matching of degree stubs; may contain self-loops and repeats.
/// Node `v` appears in exactly `degrees[v]` endpoint slots.
pub fn configuration_multigraph(degrees: &[usize], rng: &mut SimRng) -> Vec<(usize, usize)> {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v, d))
        .collect();
    assert!(stubs.len() % 2 == 0, "degree sum must be even");
    stubs.shuffle(rng);
    stubs.chunks(2).map(|c| (c[0], c[1])).collect()
}

/// Multigraph preferential attachment with `m` parallel initial edges.
/// Each new node draws its `m` targets independently, proportionally to
/// the degrees before it arrives.
pub fn preferential_attachment_multigraph(
    n: usize,
    m: usize,
    rng: &mut SimRng,
) -> Vec<(usize, usize)> {
    let mut edges = vec![(0, 1); m];
    // node v appears once per unit of degree
    let mut ends: Vec<usize> = Vec::with_capacity(2 * m * n);
    for _ in 0..m {
        ends.extend([0, 1]);
    }
    for v in 2..n {
        let len = ends.len();
        for _ in 0..m {
            let u = ends[rng.random_range(0..len)];
            edges.push((v, u));
            ends.extend([v, u]);
        }
    }
    edges
}

fn newman_watts_edges(
    n: usize,
    k: usize,
    p: f64,
    rng: &mut SimRng,
) -> Result<(Vec<(usize, usize)>, usize)> {
    let mut edges = Vec::with_capacity(n * k);
    for v in 0..n {
        for j in 1..=k {
            edges.push((v, (v + j) % n));
        }
    }
    let mean = p * k as f64 * n as f64;
    let shortcuts = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::InvalidRecipe(format!("shortcut law: {e}")))?
            .sample(rng) as usize
    } else {
        0
    };
    for _ in 0..shortcuts {
        edges.push((rng.random_range(0..n), rng.random_range(0..n)));
    }
    Ok((edges, shortcuts))
}

pub fn place_stubborn(
    graph: &UndirectedGraph,
    placement: &Placement,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = graph.n();
    let check_count = |count: usize| {
        if count == 0 || count >= n {
            Err(Error::InvalidPlacement(format!(
                "need 0 < count < n = {n}, got {count}"
            )))
        } else {
            Ok(())
        }
    };
    let mut ids = match placement {
        Placement::Explicit { ids } => {
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidPlacement(format!("duplicate id {}", w[0])));
            }
            if let Some(&bad) = sorted.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidPlacement(format!(
                    "id {bad} out of range for n = {n}"
                )));
            }
            check_count(sorted.len())?;
            sorted
        }
        Placement::UniformRandom { count } => {
            check_count(*count)?;
            let mut rng = split(seed, streams::PLACEMENT);
            rand::seq::index::sample(&mut rng, n, *count).into_vec()
        }
        Placement::Extremes => {
            check_count(2)?;
            vec![0, n - 1]
        }
        Placement::Center => {
            check_count(1)?;
            let degrees = graph.degrees();
            let max = *degrees.iter().max().unwrap();
            vec![degrees.iter().position(|&d| d == max).unwrap()]
        }
        Placement::First { count } => {
            check_count(*count)?;
            (0..*count).collect()
        }
        Placement::Last { count } => {
            check_count(*count)?;
            (n - count..n).collect()
        }
    };
    ids.sort_unstable();
    Ok(ids)
}
