use std::collections::{HashMap, VecDeque};

use crate::linalg::CsrMatrix;

use super::SocialNetwork;

/// Generator of the single dual random walk: `Q_vw = θ_vw r_vw` off the
/// diagonal, negative row sums on it. Rows of stubborn agents are zero.
#[derive(Clone, Debug)]
pub struct GeneratorQ {
    matrix: CsrMatrix,
}

impl GeneratorQ {
    pub(super) fn new(net: &SocialNetwork) -> Self {
        let n = net.n();
        let mut triplets = Vec::with_capacity(net.edges().len() + n);
        for &a in net.regular() {
            let mut total = 0.0;
            for e in net.out_edges(a) {
                let q = e.trust * e.rate;
                total += q;
                triplets.push((a, e.to, q));
            }
            triplets.push((a, a, -total));
        }
        GeneratorQ {
            matrix: CsrMatrix::from_triplets(n, n, triplets),
        }
    }

    pub fn get(&self, v: usize, w: usize) -> f64 {
        self.matrix.get(v, w)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.matrix.nrows())
            .map(|v| self.matrix.row_sum(v))
            .collect()
    }
}

/// Jump matrix of the dual walk on regular rows: `P_av = -Q_av / Q_aa`.
/// Stubborn rows are empty until a reversible extension fills them.
#[derive(Clone, Debug)]
pub struct JumpP {
    matrix: CsrMatrix,
}

impl JumpP {
    pub(super) fn new(net: &SocialNetwork) -> Self {
        let q = net.generator_q();
        let n = net.n();
        let mut triplets = Vec::with_capacity(net.edges().len());
        for &a in net.regular() {
            let hold = -q.get(a, a);
            let out = net.out_edges(a);
            // equal weights give exactly 1/d rather than w / (d w)
            let uniform = out
                .iter()
                .all(|e| e.trust * e.rate == out[0].trust * out[0].rate);
            for e in out {
                let p = if uniform {
                    1.0 / out.len() as f64
                } else {
                    e.trust * e.rate / hold
                };
                triplets.push((a, e.to, p));
            }
        }
        JumpP {
            matrix: CsrMatrix::from_triplets(n, n, triplets),
        }
    }

    pub fn get(&self, v: usize, w: usize) -> f64 {
        self.matrix.get(v, w)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

/// Generator of the coupled walk pair `(V, V')` on `V × V`.
///
/// Off the diagonal the two components move independently with `Q`. On a
/// diagonal pair `(v, v)` they jump together to `(w, w)` at rate
/// `θ_vw Q_vw`, and each moves alone at rate `(1 - θ_vw) Q_vw`. With unit
/// trust the walks coalesce. Rows are generated on demand; the full
/// matrix has `n²` rows.
#[derive(Clone, Debug)]
pub struct CoupledK {
    n: usize,
    /// `(w, Q_vw, θ_vw)` for each out-edge of `v`.
    out: Vec<Vec<(usize, f64, f64)>>,
    diag: Vec<f64>,
}

/// `K` restricted to the pairs reachable from a start set.
#[derive(Clone, Debug)]
pub struct MaterializedK {
    pub pairs: Vec<(usize, usize)>,
    pub index: HashMap<(usize, usize), usize>,
    pub matrix: CsrMatrix,
}

impl CoupledK {
    pub(super) fn new(net: &SocialNetwork) -> Self {
        let q = net.generator_q();
        let n = net.n();
        let out = (0..n)
            .map(|v| {
                net.out_edges(v)
                    .iter()
                    .map(|e| (e.to, e.rate * e.trust, e.trust))
                    .collect()
            })
            .collect();
        let diag = (0..n).map(|v| q.get(v, v)).collect();
        CoupledK { n, out, diag }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nonzero entries of row `(v, v2)`, diagonal included, sorted by pair.
    pub fn row(&self, v: usize, v2: usize) -> Vec<((usize, usize), f64)> {
        let mut entries: Vec<((usize, usize), f64)> = Vec::new();
        if v != v2 {
            for &(w, q, _) in &self.out[v] {
                entries.push(((w, v2), q));
            }
            for &(w2, q, _) in &self.out[v2] {
                entries.push(((v, w2), q));
            }
            entries.push(((v, v2), self.diag[v] + self.diag[v2]));
        } else {
            let mut joint = 0.0;
            for &(w, q, theta) in &self.out[v] {
                entries.push(((w, w), theta * q));
                joint += theta * q;
                let solo = (1.0 - theta) * q;
                if solo != 0.0 {
                    entries.push(((w, v), solo));
                    entries.push(((v, w), solo));
                }
            }
            entries.push(((v, v), 2.0 * self.diag[v] + joint));
        }
        entries.sort_by_key(|e| e.0);
        entries.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        entries.retain(|e| e.1 != 0.0);
        entries
    }

    pub fn get(&self, from: (usize, usize), to: (usize, usize)) -> f64 {
        self.row(from.0, from.1)
            .into_iter()
            .find(|e| e.0 == to)
            .map_or(0.0, |e| e.1)
    }

    /// Breadth-first materialization over every pair reachable from `starts`.
    pub fn materialize(&self, starts: impl IntoIterator<Item = (usize, usize)>) -> MaterializedK {
        let mut pairs = Vec::new();
        let mut index = HashMap::new();
        let mut queue = VecDeque::new();
        for p in starts {
            if !index.contains_key(&p) {
                index.insert(p, pairs.len());
                pairs.push(p);
                queue.push_back(p);
            }
        }
        let mut rows = Vec::new();
        while let Some(p) = queue.pop_front() {
            let row = self.row(p.0, p.1);
            for &(target, _) in &row {
                if !index.contains_key(&target) {
                    index.insert(target, pairs.len());
                    pairs.push(target);
                    queue.push_back(target);
                }
            }
            rows.push((p, row));
        }
        let m = pairs.len();
        let mut triplets = Vec::new();
        for (p, row) in rows {
            let i = index[&p];
            for (target, val) in row {
                triplets.push((i, index[&target], val));
            }
        }
        MaterializedK {
            pairs,
            index,
            matrix: CsrMatrix::from_triplets(m, m, triplets),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::graph::UndirectedGraph;
    use crate::network::{NetworkBuilder, SocialNetwork};

    fn single_edge() -> SocialNetwork {
        let mut b = NetworkBuilder::new();
        b.regular("a").unwrap();
        b.stubborn("s", 1.0).unwrap();
        b.edge("a", "s", 0.5, 0.5).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn q_single_edge() {
        let net = single_edge();
        let q = net.generator_q();
        assert_eq!(q.get(0, 1), 0.25);
        assert_eq!(q.get(0, 0), -0.25);
        assert_eq!(q.row_sums(), vec![0.0, 0.0]);
        assert_eq!(net.jump_p().get(0, 1), 1.0);
    }

    #[test]
    fn canonical_line_q_and_p() {
        let g = UndirectedGraph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let net = SocialNetwork::canonical(&g, &[(0, 0.0), (3, 1.0)], 0.5).unwrap();
        assert_eq!(net.generator_q().get(1, 0), 0.25);
        assert_eq!(net.jump_p().get(1, 0), 0.5);
        assert_eq!(net.jump_p().get(2, 3), 0.5);
    }

    #[test]
    fn heterogeneous_rates_normalize() {
        let mut b = NetworkBuilder::new();
        b.regular("a").unwrap();
        b.stubborn("s", 0.0).unwrap();
        b.stubborn("t", 1.0).unwrap();
        b.edge("a", "s", 1.0, 1.0)
            .unwrap()
            .edge("a", "t", 3.0, 1.0)
            .unwrap();
        let net = b.build().unwrap();
        assert_eq!(net.jump_p().get(0, 1), 0.25);
        assert_eq!(net.jump_p().get(0, 2), 0.75);
    }

    #[test]
    fn coupled_rows_cases() {
        let mut b = NetworkBuilder::new();
        for a in ["a", "b"] {
            b.regular(a).unwrap();
        }
        b.stubborn("s", 0.0).unwrap();
        b.edge("a", "b", 1.0, 0.5).unwrap();
        b.edge("b", "a", 2.0, 0.25).unwrap();
        b.edge("a", "s", 1.0, 1.0).unwrap();
        b.edge("b", "s", 1.0, 0.5).unwrap();
        let net = b.build().unwrap();
        let q = net.generator_q();
        let k = net.coupled_k();
        // off-diagonal pair: each component moves alone with Q
        assert_eq!(k.get((0, 1), (2, 1)), q.get(0, 2));
        assert_eq!(k.get((0, 1), (0, 0)), q.get(1, 0));
        assert_eq!(k.get((0, 1), (0, 1)), q.get(0, 0) + q.get(1, 1));
        assert_eq!(k.get((0, 1), (2, 2)), 0.0);
        // diagonal pair
        assert_eq!(k.get((0, 0), (1, 1)), 0.5 * q.get(0, 1));
        assert_eq!(k.get((0, 0), (1, 0)), 0.5 * q.get(0, 1));
        assert_eq!(k.get((0, 0), (0, 1)), 0.5 * q.get(0, 1));
        assert_eq!(k.get((0, 0), (2, 2)), q.get(0, 2));
        assert_eq!(
            k.get((0, 0), (2, 0)),
            0.0,
            "unit trust edge has no solo move"
        );
        let expected_diag = 2.0 * q.get(0, 0) + 0.5 * q.get(0, 1) + q.get(0, 2);
        assert!((k.get((0, 0), (0, 0)) - expected_diag).abs() < 1e-15);
        for v in 0..3 {
            for w in 0..3 {
                let sum: f64 = k.row(v, w).iter().map(|e| e.1).sum();
                assert!(sum.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_trust_diagonal_only_joint_moves() {
        let g = UndirectedGraph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let net = SocialNetwork::canonical(&g, &[(0, 0.0), (4, 1.0)], 1.0).unwrap();
        let k = net.coupled_k();
        for v in 0..5 {
            for ((w, w2), _) in k.row(v, v) {
                assert_eq!(w, w2);
            }
        }
        let mk = k.materialize([(1, 1)]);
        assert!(mk.pairs.iter().all(|p| p.0 == p.1));
    }
}
