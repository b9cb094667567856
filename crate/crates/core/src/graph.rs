//! Graphs, bipartitions, realizations and half-stochastic composition.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{parameter, structural, Result};
use crate::rng;

/// Immutable simple undirected graph on vertices `0..n` with indexed edges.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<(usize, usize)>>,
    fingerprint: u64,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

impl Eq for Graph {}

impl Graph {
    /// Build a graph, rejecting self-loops, duplicates and out-of-range endpoints.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(structural(format!("edge {i} ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(structural(format!("edge {i} is a self-loop on {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(structural(format!("edge {i} ({u},{v}) is a duplicate")));
            }
        }
        Ok(Self::from_checked(n, edges))
    }

    fn from_checked(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut fp = rng::mix64(n as u64);
        for (i, &(u, v)) in edges.iter().enumerate() {
            adj[u].push((v, i));
            adj[v].push((u, i));
            fp = rng::derive(fp, ((u as u64) << 32) ^ v as u64);
        }
        Graph { n, edges, adj, fingerprint: fp }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_checked(n, Vec::new())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(neighbor, edge index)` pairs in edge-index order.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Hash of `(n, edge list)`; used to detect masks built for another graph.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Edge index joining `u` and `v`, if any.
    pub fn find_edge(&self, u: usize, v: usize) -> Option<usize> {
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() { (u, v) } else { (v, u) };
        self.adj[a].iter().find(|&&(w, _)| w == b).map(|&(_, e)| e)
    }

    /// Subgraph on the same vertex set keeping edges for which `keep` holds.
    pub fn edge_subgraph(&self, mut keep: impl FnMut(usize) -> bool) -> Subgraph {
        let mut edges = Vec::new();
        let mut parent_edge = Vec::new();
        for (i, &uv) in self.edges.iter().enumerate() {
            if keep(i) {
                edges.push(uv);
                parent_edge.push(i);
            }
        }
        Subgraph { graph: Graph::from_checked(self.n, edges), parent_edge }
    }

    /// Max degree counting only edges selected by `mask`.
    pub fn max_degree_in(&self, mask: &[bool]) -> usize {
        let mut deg = vec![0usize; self.n];
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if mask[i] {
                deg[u] += 1;
                deg[v] += 1;
            }
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

/// A derived graph plus the map from its edge indices to the parent's.
#[derive(Clone, Debug)]
pub struct Subgraph {
    pub graph: Graph,
    pub parent_edge: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Two-coloring of the vertices; every edge joins `A` to `B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    side: Vec<Side>,
}

impl Bipartition {
    pub fn new(graph: &Graph, side: Vec<Side>) -> Result<Self> {
        let b = Bipartition { side };
        b.validate(graph)?;
        Ok(b)
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        if self.side.len() != graph.n() {
            return Err(structural(format!("bipartition has {} labels for {} vertices", self.side.len(), graph.n())));
        }
        for (i, &(u, v)) in graph.edges().iter().enumerate() {
            if self.side[u] == self.side[v] {
                return Err(structural(format!("edge {i} ({u},{v}) lies inside one side")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn side(&self, v: usize) -> Side {
        self.side[v]
    }

    #[inline]
    pub fn is_a(&self, v: usize) -> bool {
        self.side[v] == Side::A
    }

    pub fn count(&self, s: Side) -> usize {
        self.side.iter().filter(|&&x| x == s).count()
    }

    pub fn vertices(&self, s: Side) -> impl Iterator<Item = usize> + '_ {
        self.side.iter().enumerate().filter(move |(_, &x)| x == s).map(|(v, _)| v)
    }

    /// The `A` endpoint of an edge first.
    #[inline]
    pub fn orient(&self, (u, v): (usize, usize)) -> (usize, usize) {
        if self.is_a(u) {
            (u, v)
        } else {
            (v, u)
        }
    }
}

/// BFS 2-coloring. The lowest-index vertex of each component is labelled `A`.
pub fn bipartition(graph: &Graph) -> Option<Bipartition> {
    let mut color: Vec<Option<Side>> = vec![None; graph.n()];
    let mut queue = VecDeque::new();
    for s in 0..graph.n() {
        if color[s].is_some() {
            continue;
        }
        color[s] = Some(Side::A);
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].unwrap();
            let other = if cu == Side::A { Side::B } else { Side::A };
            for &(w, _) in graph.neighbors(u) {
                match color[w] {
                    None => {
                        color[w] = Some(other);
                        queue.push_back(w);
                    }
                    Some(c) if c == cu => return None,
                    Some(_) => {}
                }
            }
        }
    }
    Some(Bipartition { side: color.into_iter().map(Option::unwrap).collect() })
}

/// Which edges of a parent graph survived an independent coin flip per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    fingerprint: u64,
    p: f64,
    realized: Vec<bool>,
}

/// Per-edge draws are keyed on `(seed, edge index)`, so an edge gets the same
/// outcome no matter which other edges are sampled alongside it.
pub fn sample_realization(graph: &Graph, p: f64, seed: u64) -> Realization {
    let key = rng::derive(seed, rng::tag::REALIZATION);
    let realized = (0..graph.m()).map(|e| rng::coin(key, e as u64, p)).collect();
    Realization { fingerprint: graph.fingerprint(), p, realized }
}

/// Outcome of the realization coin for a single edge; agrees with
/// [`sample_realization`] under the same seed.
pub fn edge_realized(seed: u64, edge: usize, p: f64) -> bool {
    rng::coin(rng::derive(seed, rng::tag::REALIZATION), edge as u64, p)
}

impl Realization {
    pub fn from_mask(graph: &Graph, p: f64, realized: Vec<bool>) -> Result<Self> {
        if realized.len() != graph.m() {
            return Err(structural(format!("realization mask has {} entries for {} edges", realized.len(), graph.m())));
        }
        Ok(Realization { fingerprint: graph.fingerprint(), p, realized })
    }

    pub fn full(graph: &Graph) -> Self {
        Realization { fingerprint: graph.fingerprint(), p: 1.0, realized: vec![true; graph.m()] }
    }

    pub fn none(graph: &Graph) -> Self {
        Realization { fingerprint: graph.fingerprint(), p: 0.0, realized: vec![false; graph.m()] }
    }

    #[inline]
    pub fn is_realized(&self, e: usize) -> bool {
        self.realized[e]
    }

    pub fn mask(&self) -> &[bool] {
        &self.realized
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn count(&self) -> usize {
        self.realized.iter().filter(|&&r| r).count()
    }

    pub fn check_parent(&self, graph: &Graph) -> Result<()> {
        if self.fingerprint != graph.fingerprint() || self.realized.len() != graph.m() {
            return Err(structural("realization belongs to a different graph"));
        }
        Ok(())
    }

    /// The realized subgraph `G_p`.
    pub fn subgraph(&self, graph: &Graph) -> Result<Subgraph> {
        self.check_parent(graph)?;
        Ok(graph.edge_subgraph(|e| self.realized[e]))
    }

    /// Reveal only the queried edges.
    pub fn restrict(&self, queried: &[usize]) -> QueryAnswers {
        QueryAnswers {
            fingerprint: self.fingerprint,
            queried: queried.to_vec(),
            realized: queried.iter().map(|&e| self.realized[e]).collect(),
        }
    }
}

/// Realization status of a fixed list of queried edges, and nothing else.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryAnswers {
    fingerprint: u64,
    queried: Vec<usize>,
    realized: Vec<bool>,
}

impl QueryAnswers {
    pub fn queried(&self) -> &[usize] {
        &self.queried
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `(edge, realized)` pairs in query order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.queried.iter().copied().zip(self.realized.iter().copied())
    }

    pub fn realized_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.iter().filter(|&(_, r)| r).map(|(e, _)| e)
    }
}

/// Split of the edge set into queried `Q` (true) and certain `S` (false).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePartition {
    in_q: Vec<bool>,
}

impl EdgePartition {
    pub fn from_mask(graph: &Graph, in_q: Vec<bool>) -> Result<Self> {
        if in_q.len() != graph.m() {
            return Err(structural(format!("partition mask has {} entries for {} edges", in_q.len(), graph.m())));
        }
        Ok(EdgePartition { in_q })
    }

    /// `Q = ∅, S = E`.
    pub fn all_certain(m: usize) -> Self {
        EdgePartition { in_q: vec![false; m] }
    }

    /// `Q = E, S = ∅`.
    pub fn all_queried(m: usize) -> Self {
        EdgePartition { in_q: vec![true; m] }
    }

    pub fn from_queried(m: usize, queried: &[usize]) -> Self {
        let mut in_q = vec![false; m];
        for &e in queried {
            in_q[e] = true;
        }
        EdgePartition { in_q }
    }

    #[inline]
    pub fn in_q(&self, e: usize) -> bool {
        self.in_q[e]
    }

    pub fn mask(&self) -> &[bool] {
        &self.in_q
    }

    pub fn len(&self) -> usize {
        self.in_q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_q.is_empty()
    }

    pub fn q_edges(&self) -> Vec<usize> {
        (0..self.in_q.len()).filter(|&e| self.in_q[e]).collect()
    }

    pub fn s_edges(&self) -> Vec<usize> {
        (0..self.in_q.len()).filter(|&e| !self.in_q[e]).collect()
    }

    pub fn move_to_q(&mut self, edges: &[usize]) {
        for &e in edges {
            self.in_q[e] = true;
        }
    }

    pub fn q_max_degree(&self, graph: &Graph) -> usize {
        graph.max_degree_in(&self.in_q)
    }
}

/// `H = Q_p ∪ S`: every certain edge plus the realized queried ones.
pub fn half_stochastic_union(graph: &Graph, partition: &EdgePartition, realization: &Realization) -> Result<Subgraph> {
    realization.check_parent(graph)?;
    if partition.len() != graph.m() {
        return Err(structural("partition belongs to a different graph"));
    }
    Ok(graph.edge_subgraph(|e| !partition.in_q(e) || realization.is_realized(e)))
}

/// Per-edge nonnegative weights; feasibility is checked against per-vertex budgets.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalAssignment {
    pub value: Vec<f64>,
}

/// Slack allowed on every budget comparison.
pub const FEAS_TOL: f64 = 1e-9;

impl FractionalAssignment {
    pub fn zeros(m: usize) -> Self {
        FractionalAssignment { value: vec![0.0; m] }
    }

    pub fn vertex_sums(&self, graph: &Graph) -> Vec<f64> {
        let mut s = vec![0.0; graph.n()];
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            s[u] += self.value[e];
            s[v] += self.value[e];
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.value.iter().sum()
    }

    /// All values nonnegative and every vertex sum within its budget (+1e-9).
    pub fn is_feasible(&self, graph: &Graph, budgets: &[f64]) -> bool {
        self.value.len() == graph.m()
            && self.value.iter().all(|&x| x >= -FEAS_TOL)
            && self.vertex_sums(graph).iter().zip(budgets).all(|(&s, &b)| s <= b + FEAS_TOL)
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(parameter(format!("{name} must lie in [0,1], got {p}")));
    }
    Ok(())
}
