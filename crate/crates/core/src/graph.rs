//! Simple undirected graphs, random generators and link-prediction splits.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::tensor::{Csr, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("edge ({0}, {1}) is a self-loop or out of range")]
    BadEdge(usize, usize),
    #[error("cannot sample {wanted} negatives: {reason}")]
    NegativeSampling { wanted: usize, reason: String },
    #[error("edge list parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Undirected simple graph on nodes `0..n`. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&ordered(i, j))
    }

    /// Adds an edge; returns `false` if it was already present.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool, GraphError> {
        if i == j || i >= self.n || j >= self.n {
            return Err(GraphError::BadEdge(i, j));
        }
        Ok(self.edges.insert(ordered(i, j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Dense symmetric 0/1 adjacency matrix with zero diagonal.
    pub fn adjacency(&self) -> Tensor {
        let n = self.n;
        let mut a = Tensor::zeros(&[n, n]);
        for &(i, j) in &self.edges {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        a
    }

    /// Sparse adjacency, optionally with self loops, rows scaled to mean aggregation.
    pub fn mean_aggregation(&self, self_loops: bool) -> Rc<Csr> {
        let mut trip = Vec::with_capacity(2 * self.edges.len() + self.n);
        let mut deg = self.degrees();
        if self_loops {
            for (i, d) in deg.iter_mut().enumerate() {
                *d += 1;
                trip.push((i, i, 0.0));
            }
        }
        for &(i, j) in &self.edges {
            trip.push((i, j, 0.0));
            trip.push((j, i, 0.0));
        }
        for t in trip.iter_mut() {
            t.2 = if deg[t.0] > 0 { 1.0 / deg[t.0] as f64 } else { 0.0 };
        }
        Rc::new(Csr::from_triplets(self.n, self.n, trip))
    }

    /// Sparse 0/1 adjacency.
    pub fn sparse_adjacency(&self) -> Rc<Csr> {
        let mut trip = Vec::with_capacity(2 * self.edges.len());
        for &(i, j) in &self.edges {
            trip.push((i, j, 1.0));
            trip.push((j, i, 1.0));
        }
        Rc::new(Csr::from_triplets(self.n, self.n, trip))
    }

    /// Plain-text edge list: a `n=<count>` header then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::with_capacity(16 * self.edges.len() + 16);
        let _ = writeln!(s, "n={}", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            msg: "missing `n=<count>` header".into(),
        })?;
        let n = header
            .trim()
            .strip_prefix("n=")
            .and_then(|x| x.trim().parse::<usize>().ok())
            .ok_or_else(|| GraphError::Parse {
                line: 1,
                msg: format!("bad header {header:?}"),
            })?;
        let mut g = Graph::empty(n);
        for (ln, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| GraphError::Parse {
                    line: ln + 1,
                    msg: e.to_string(),
                })
            };
            if parts.len() != 2 {
                return Err(GraphError::Parse {
                    line: ln + 1,
                    msg: format!("expected `i j`, got {line:?}"),
                });
            }
            let (i, j) = (parse(parts[0])?, parse(parts[1])?);
            g.add_edge(i, j).map_err(|e| GraphError::Parse {
                line: ln + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(g)
    }
}

/// Declarative description of a random graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    /// Erdős–Rényi: each pair independently with probability `p`.
    Er {
        n: usize,
        p: f64,
    },
    /// Barabási–Albert: `m` edges per arriving node, seeded by a complete graph on `m` nodes.
    Ba {
        n: usize,
        m: usize,
    },
    Cycle {
        len: usize,
    },
    /// Two disjoint copies of `base` (node `i` and `i + n`) plus `extra_edges` uniformly
    /// random new edges over all `2n` nodes. With `mirrored`, each random edge is added
    /// together with its image under the copy swap, so `i <-> i + n` stays an automorphism.
    TwoCopy {
        base: Box<GraphSpec>,
        extra_edges: usize,
        #[serde(default)]
        mirrored: bool,
    },
}

impl GraphSpec {
    pub fn node_count(&self) -> usize {
        match self {
            GraphSpec::Er { n, .. } | GraphSpec::Ba { n, .. } => *n,
            GraphSpec::Cycle { len } => *len,
            GraphSpec::TwoCopy { base, .. } => 2 * base.node_count(),
        }
    }
}

pub fn generate_graph(spec: &GraphSpec, seed: u64) -> Result<Graph, GraphError> {
    let mut r = rng::seeded(seed);
    generate_with(spec, &mut r)
}

fn generate_with(spec: &GraphSpec, r: &mut impl Rng) -> Result<Graph, GraphError> {
    match spec {
        GraphSpec::Er { n, p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(GraphError::InvalidParams(format!("p = {p} not in [0, 1]")));
            }
            let mut g = Graph::empty(*n);
            for i in 0..*n {
                for j in i + 1..*n {
                    if r.random::<f64>() < *p {
                        g.edges.insert((i, j));
                    }
                }
            }
            Ok(g)
        }
        GraphSpec::Ba { n, m } => barabasi_albert(*n, *m, r),
        GraphSpec::Cycle { len } => {
            if *len < 3 {
                return Err(GraphError::InvalidParams(format!("cycle length {len} < 3")));
            }
            Graph::from_edges(*len, (0..*len).map(|i| (i, (i + 1) % len)))
        }
        GraphSpec::TwoCopy {
            base,
            extra_edges,
            mirrored,
        } => {
            let h = generate_with(base, r)?;
            let n = h.n;
            let mut g = Graph::empty(2 * n);
            for (i, j) in h.edges() {
                g.edges.insert((i, j));
                g.edges.insert((i + n, j + n));
            }
            let total_pairs = 2 * n * (2 * n - 1) / 2;
            if g.edge_count() + extra_edges > total_pairs {
                return Err(GraphError::InvalidParams(format!(
                    "cannot add {extra_edges} edges to a graph with {} of {total_pairs} pairs used",
                    g.edge_count()
                )));
            }
            let swap = |x: usize| if x < n { x + n } else { x - n };
            let mut added = 0;
            while added < *extra_edges {
                let a = r.random_range(0..2 * n);
                let b = r.random_range(0..2 * n);
                if a == b || g.has_edge(a, b) {
                    continue;
                }
                g.edges.insert(ordered(a, b));
                if *mirrored {
                    g.edges.insert(ordered(swap(a), swap(b)));
                }
                added += 1;
            }
            Ok(g)
        }
    }
}

fn barabasi_albert(n: usize, m: usize, r: &mut impl Rng) -> Result<Graph, GraphError> {
    if m == 0 || m >= n {
        return Err(GraphError::InvalidParams(format!("need 1 <= m < n, got m={m}, n={n}")));
    }
    let mut g = Graph::empty(n);
    // every endpoint appears once per incident edge
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * m * n);
    for i in 0..m {
        for j in i + 1..m {
            g.edges.insert((i, j));
            repeated.push(i);
            repeated.push(j);
        }
    }
    let mut targets: Vec<usize> = Vec::with_capacity(m);
    for v in m..n {
        targets.clear();
        while targets.len() < m {
            let t = if repeated.is_empty() {
                r.random_range(0..v)
            } else {
                repeated[r.random_range(0..repeated.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            g.edges.insert(ordered(t, v));
            repeated.push(t);
            repeated.push(v);
        }
    }
    Ok(g)
}

/// Positive edges partitioned into train/val/test plus sampled non-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

const MAX_REJECTIONS_PER_SAMPLE: usize = 1000;

/// Uniform random split of the edges; validation and test sets get
/// `neg_per_pos` non-edges per positive.
pub fn split_edges(g: &Graph, ratios: (f64, f64, f64), neg_per_pos: usize, seed: u64) -> Result<EdgeSplit, GraphError> {
    let (tr, va, te) = ratios;
    if tr < 0.0 || va < 0.0 || te < 0.0 || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(GraphError::InvalidParams(format!(
            "ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let mut r = rng::seeded(seed);
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    edges.shuffle(&mut r);
    let m = edges.len();
    let n_val = (va * m as f64).floor() as usize;
    let n_test = (te * m as f64).floor() as usize;
    let test_pos = edges.split_off(m - n_test);
    let val_pos = edges.split_off(m - n_test - n_val);
    let train_pos = edges;

    let wanted = neg_per_pos * (val_pos.len() + test_pos.len());
    let mut taken: HashSet<(usize, usize)> = HashSet::with_capacity(wanted);
    let negs = sample_non_edges(g, wanted, &mut taken, &mut r)?;
    let (val_neg, test_neg) = {
        let mut v = negs;
        let t = v.split_off(neg_per_pos * val_pos.len());
        (v, t)
    };
    Ok(EdgeSplit {
        train_pos,
        val_pos,
        test_pos,
        val_neg,
        test_neg,
    })
}

/// Rejection-samples `count` distinct non-edges of `g` not already in `taken`.
pub fn sample_non_edges(
    g: &Graph,
    count: usize,
    taken: &mut HashSet<(usize, usize)>,
    r: &mut impl Rng,
) -> Result<Vec<(usize, usize)>, GraphError> {
    let n = g.node_count();
    let pairs = n * n.saturating_sub(1) / 2;
    let free = pairs.saturating_sub(g.edge_count() + taken.len());
    if count > free {
        return Err(GraphError::NegativeSampling {
            wanted: count,
            reason: format!("only {free} non-edges available"),
        });
    }
    let mut out = Vec::with_capacity(count);
    let mut rejections = 0;
    while out.len() < count {
        let a = r.random_range(0..n);
        let b = r.random_range(0..n);
        let e = ordered(a, b);
        if a == b || g.edges.contains(&e) || taken.contains(&e) {
            rejections += 1;
            if rejections > MAX_REJECTIONS_PER_SAMPLE * count.max(1) {
                return Err(GraphError::NegativeSampling {
                    wanted: count,
                    reason: "graph too dense, rejection budget exhausted".into(),
                });
            }
            continue;
        }
        taken.insert(e);
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_six() {
        let g = generate_graph(&GraphSpec::Cycle { len: 6 }, 0).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert!(g.degrees().iter().all(|&d| d == 2));
    }

    #[test]
    fn cycle_too_short() {
        assert!(generate_graph(&GraphSpec::Cycle { len: 2 }, 0).is_err());
    }

    #[test]
    fn cycle_four_adjacency() {
        let a = generate_graph(&GraphSpec::Cycle { len: 4 }, 0).unwrap().adjacency();
        assert_eq!(a.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn empty_adjacency_is_zero() {
        assert_eq!(Graph::empty(3).adjacency(), Tensor::zeros(&[3, 3]));
    }

    #[test]
    fn er_edge_count_within_four_sigma() {
        let g = generate_graph(&GraphSpec::Er { n: 1000, p: 0.05 }, 3).unwrap();
        let pairs = 1000.0 * 999.0 / 2.0;
        let mean = 0.05 * pairs;
        let sd = (pairs * 0.05 * 0.95_f64).sqrt();
        assert!((g.edge_count() as f64 - mean).abs() < 4.0 * sd);
    }

    #[test]
    fn er_rejects_bad_p() {
        assert!(generate_graph(&GraphSpec::Er { n: 5, p: 1.5 }, 0).is_err());
    }

    #[test]
    fn ba_edge_count() {
        let (n, m) = (200, 5);
        let g = generate_graph(&GraphSpec::Ba { n, m }, 1).unwrap();
        assert_eq!(g.edge_count(), m * (m - 1) / 2 + m * (n - m));
        assert!(generate_graph(&GraphSpec::Ba { n: 5, m: 5 }, 1).is_err());
    }

    #[test]
    fn two_copy_counts_are_exact() {
        let base = GraphSpec::Er { n: 100, p: 0.1 };
        let h = generate_graph(&base, 9).unwrap();
        let spec = GraphSpec::TwoCopy {
            base: Box::new(base),
            extra_edges: 50,
            mirrored: false,
        };
        let g = generate_graph(&spec, 9).unwrap();
        assert_eq!(g.node_count(), 200);
        assert_eq!(g.edge_count(), 2 * h.edge_count() + 50);
    }

    #[test]
    fn two_copy_without_extra_edges_has_swap_automorphism() {
        let spec = GraphSpec::TwoCopy {
            base: Box::new(GraphSpec::Ba { n: 50, m: 3 }),
            extra_edges: 0,
            mirrored: false,
        };
        let g = generate_graph(&spec, 4).unwrap();
        for (i, j) in g.edges() {
            let (a, b) = ((i + 50) % 100, (j + 50) % 100);
            assert!(g.has_edge(a, b));
        }
    }

    #[test]
    fn mirrored_extra_edges_keep_automorphism() {
        let spec = GraphSpec::TwoCopy {
            base: Box::new(GraphSpec::Er { n: 40, p: 0.1 }),
            extra_edges: 30,
            mirrored: true,
        };
        let g = generate_graph(&spec, 2).unwrap();
        for (i, j) in g.edges() {
            assert!(g.has_edge((i + 40) % 80, (j + 40) % 80));
        }
    }

    #[test]
    fn split_cycle_ten() {
        let g = generate_graph(&GraphSpec::Cycle { len: 10 }, 0).unwrap();
        let s = split_edges(&g, (0.8, 0.1, 0.1), 1, 5).unwrap();
        assert_eq!((s.train_pos.len(), s.val_pos.len(), s.test_pos.len()), (8, 1, 1));
        let mut all: Vec<_> = s
            .train_pos
            .iter()
            .chain(&s.val_pos)
            .chain(&s.test_pos)
            .copied()
            .collect();
        all.sort();
        assert_eq!(all, g.edges().collect::<Vec<_>>());
        for e in s.val_neg.iter().chain(&s.test_neg) {
            assert!(!g.has_edge(e.0, e.1));
        }
        assert_eq!(s, split_edges(&g, (0.8, 0.1, 0.1), 1, 5).unwrap());
    }

    #[test]
    fn complete_graph_negatives_fail() {
        let g = Graph::from_edges(5, (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j)))).unwrap();
        let err = split_edges(&g, (0.6, 0.2, 0.2), 1, 0).unwrap_err();
        assert!(matches!(err, GraphError::NegativeSampling { .. }));
    }

    #[test]
    fn edge_list_roundtrip_and_errors() {
        let g = generate_graph(&GraphSpec::Cycle { len: 5 }, 0).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("n=5\n0 1\n"));
        assert_eq!(Graph::from_edge_list(&text).unwrap(), g);
        assert!(matches!(
            Graph::from_edge_list("n=3\n0 0\n"),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(Graph::from_edge_list("3\n0 1\n").is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = GraphSpec::Ba { n: 60, m: 3 };
        assert_eq!(generate_graph(&spec, 11).unwrap(), generate_graph(&spec, 11).unwrap());
    }
}
