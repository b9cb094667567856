//! Matchings, vertex covers and the exact oracles built on them.

use serde::{Deserialize, Serialize};

use crate::error::{structural, Error, Result};
use crate::graph::{Bipartition, Graph, Realization, Side};

/// A set of vertex-disjoint edges, stored as sorted edge indices plus a
/// per-vertex partner table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    edges: Vec<usize>,
    mate: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n: usize) -> Self {
        Matching { edges: Vec::new(), mate: vec![None; n] }
    }

    /// Validate that `edges` are distinct, in range and pairwise disjoint.
    pub fn from_edges(graph: &Graph, mut edges: Vec<usize>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        let mut mate = vec![None; graph.n()];
        for &e in &edges {
            if e >= graph.m() {
                return Err(structural(format!("edge {e} out of range")));
            }
            let (u, v) = graph.edge(e);
            if mate[u].is_some() || mate[v].is_some() {
                return Err(structural(format!("edge {e} ({u},{v}) shares a vertex with another matched edge")));
            }
            mate[u] = Some(v);
            mate[v] = Some(u);
        }
        Ok(Matching { edges, mate })
    }

    pub(crate) fn from_parts(graph: &Graph, mut edges: Vec<usize>) -> Self {
        edges.sort_unstable();
        let mut mate = vec![None; graph.n()];
        for &e in &edges {
            let (u, v) = graph.edge(e);
            mate[u] = Some(v);
            mate[v] = Some(u);
        }
        Matching { edges, mate }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn contains(&self, e: usize) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    #[inline]
    pub fn partner(&self, v: usize) -> Option<usize> {
        self.mate[v]
    }

    #[inline]
    pub fn is_matched(&self, v: usize) -> bool {
        self.mate[v].is_some()
    }

    pub fn n(&self) -> usize {
        self.mate.len()
    }

    /// No edge of `graph` (restricted to `keep`) has both endpoints free.
    pub fn is_maximal(&self, graph: &Graph, keep: impl Fn(usize) -> bool) -> bool {
        graph.edges().iter().enumerate().all(|(e, &(u, v))| !keep(e) || self.is_matched(u) || self.is_matched(v))
    }

    /// Map edge indices of a subgraph matching back to the parent graph.
    pub fn lift(&self, parent: &Graph, parent_edge: &[usize]) -> Matching {
        Matching::from_parts(parent, self.edges.iter().map(|&e| parent_edge[e]).collect())
    }
}

/// A vertex set; validity is always checked against a target edge set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexCover {
    members: Vec<usize>,
}

impl VertexCover {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        VertexCover { members }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn indicator(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &v in &self.members {
            m[v] = true;
        }
        m
    }

    /// Number of edges selected by `keep` with no endpoint in the cover.
    pub fn uncovered(&self, graph: &Graph, keep: impl Fn(usize) -> bool) -> usize {
        let ind = self.indicator(graph.n());
        graph.edges().iter().enumerate().filter(|&(e, &(u, v))| keep(e) && !ind[u] && !ind[v]).count()
    }

    pub fn covers(&self, graph: &Graph) -> bool {
        self.uncovered(graph, |_| true) == 0
    }
}

/// Maximum matching of a bipartite graph (Hopcroft-Karp).
///
/// Ties are broken by vertex index, then by edge index, so the result is a
/// fixed function of the graph.
pub fn max_matching_bipartite(graph: &Graph, sides: &Bipartition) -> Result<Matching> {
    sides.validate(graph)?;
    Ok(hopcroft_karp(graph, sides, |_| true, None))
}

/// Maximum matching restricted to edges with `mask[e] == true`. `sides` must be
/// a valid bipartition of `graph`; this is not rechecked.
pub fn max_matching_masked(graph: &Graph, sides: &Bipartition, mask: &[bool]) -> Matching {
    hopcroft_karp(graph, sides, |e| mask[e], None)
}

/// Like [`max_matching_masked`] with adjacency scanned in increasing `rank[e]`
/// instead of edge-index order.
pub fn max_matching_ranked(graph: &Graph, sides: &Bipartition, mask: &[bool], rank: &[u32]) -> Matching {
    hopcroft_karp(graph, sides, |e| mask[e], Some(rank))
}

const UNSET: usize = usize::MAX;

fn hopcroft_karp(graph: &Graph, sides: &Bipartition, keep: impl Fn(usize) -> bool, rank: Option<&[u32]>) -> Matching {
    let n = graph.n();
    // Local A-side adjacency in scan order.
    let a_vertices: Vec<usize> = sides.vertices(Side::A).collect();
    let mut adj: Vec<Vec<(usize, usize)>> = Vec::with_capacity(a_vertices.len());
    for &a in &a_vertices {
        let mut list: Vec<(usize, usize)> = graph.neighbors(a).iter().copied().filter(|&(_, e)| keep(e)).collect();
        if let Some(r) = rank {
            list.sort_by_key(|&(_, e)| (r[e], e));
        }
        adj.push(list);
    }
    let na = a_vertices.len();
    let mut match_a: Vec<usize> = vec![UNSET; na]; // edge index
    let mut match_b: Vec<usize> = vec![UNSET; n]; // local A index, by B vertex id
    let mut dist = vec![u32::MAX; na];
    let mut queue = Vec::with_capacity(na);
    let mut iter = vec![0usize; na];

    loop {
        // BFS layering from free A vertices.
        queue.clear();
        for i in 0..na {
            if match_a[i] == UNSET && !adj[i].is_empty() {
                dist[i] = 0;
                queue.push(i);
            } else {
                dist[i] = u32::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let i = queue[head];
            head += 1;
            for &(b, _) in &adj[i] {
                let j = match_b[b];
                if j == UNSET {
                    found = true;
                } else if dist[j] == u32::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push(j);
                }
            }
        }
        if !found {
            break;
        }
        iter.iter_mut().for_each(|x| *x = 0);
        let mut augmented = false;
        for i in 0..na {
            if match_a[i] == UNSET && dist[i] == 0 && augment(i, &adj, &mut match_a, &mut match_b, &mut dist, &mut iter)
            {
                augmented = true;
            }
        }
        if !augmented {
            break;
        }
    }
    let edges = match_a.into_iter().filter(|&e| e != UNSET).collect();
    Matching::from_parts(graph, edges)
}

fn augment(
    i: usize,
    adj: &[Vec<(usize, usize)>],
    match_a: &mut [usize],
    match_b: &mut [usize],
    dist: &mut [u32],
    iter: &mut [usize],
) -> bool {
    while iter[i] < adj[i].len() {
        let (b, e) = adj[i][iter[i]];
        iter[i] += 1;
        let j = match_b[b];
        let ok = if j == UNSET {
            true
        } else if dist[j] == dist[i] + 1 {
            augment(j, adj, match_a, match_b, dist, iter)
        } else {
            false
        };
        if ok {
            match_a[i] = e;
            match_b[b] = i;
            return true;
        }
    }
    dist[i] = u32::MAX;
    false
}

/// Minimum vertex cover from a maximum matching of a bipartite graph.
///
/// Alternating reachability from free `A` vertices gives a set `Z`; the cover
/// is `(A \ Z) ∪ (B ∩ Z)`. If `matching` is not maximum the size equality
/// with the matching fails, which callers are expected to check.
pub fn konig_vertex_cover(graph: &Graph, sides: &Bipartition, matching: &Matching) -> Result<VertexCover> {
    sides.validate(graph)?;
    if matching.n() != graph.n() {
        return Err(structural("matching belongs to a different graph"));
    }
    Ok(konig_masked(graph, sides, matching, |_| true))
}

pub(crate) fn konig_masked(
    graph: &Graph,
    sides: &Bipartition,
    matching: &Matching,
    keep: impl Fn(usize) -> bool,
) -> VertexCover {
    let n = graph.n();
    let mut reached = vec![false; n];
    let mut stack = Vec::new();
    for v in sides.vertices(Side::A) {
        if !matching.is_matched(v) {
            reached[v] = true;
            stack.push(v);
        }
    }
    while let Some(a) = stack.pop() {
        for &(b, e) in graph.neighbors(a) {
            if !keep(e) || reached[b] || matching.partner(a) == Some(b) {
                continue;
            }
            reached[b] = true;
            if let Some(a2) = matching.partner(b) {
                if !reached[a2] {
                    reached[a2] = true;
                    stack.push(a2);
                }
            }
        }
    }
    let members = (0..n).filter(|&v| if sides.is_a(v) { !reached[v] } else { reached[v] }).collect();
    VertexCover::new(members)
}

fn has_edge(graph: &Graph, v: usize, keep: &impl Fn(usize) -> bool) -> bool {
    graph.neighbors(v).iter().any(|&(_, e)| keep(e))
}

/// Exact minimum vertex cover `ν` of a bipartite graph restricted to `mask`.
pub fn bipartite_mvc_masked(graph: &Graph, sides: &Bipartition, mask: &[bool]) -> VertexCover {
    let m = max_matching_masked(graph, sides, mask);
    let c = konig_masked(graph, sides, &m, |e| mask[e]);
    debug_assert_eq!(c.size(), m.size());
    c
}

/// Default vertex cap for [`exact_mvc_general`].
pub const DEFAULT_EXACT_CAP: usize = 40;
const BITSET_LIMIT: usize = 64;

/// Exact minimum vertex cover of a general graph by branch and bound.
///
/// Degree-0 and degree-1 reductions, a greedy-matching lower bound, and
/// branching on a maximum-degree vertex (take it, or take all of its
/// neighbors). Works per connected component; `budget_vertices` caps the
/// whole graph's vertex count.
pub fn exact_mvc_general(graph: &Graph, budget_vertices: usize) -> Result<VertexCover> {
    if graph.n() > budget_vertices {
        return Err(Error::Capacity { what: "graph".into(), size: graph.n(), cap: budget_vertices });
    }
    mvc_by_components(graph, |_| true, budget_vertices)
}

/// Exact MVC of the edges selected by `keep`, with the cap applied to each
/// connected component (ignoring isolated vertices) rather than to the graph.
pub fn mvc_by_components(graph: &Graph, keep: impl Fn(usize) -> bool, component_cap: usize) -> Result<VertexCover> {
    let cap = component_cap.min(BITSET_LIMIT);
    let mut cover = Vec::new();
    for comp in components(graph, &keep) {
        if comp.len() > cap {
            return Err(Error::Capacity { what: "connected component".into(), size: comp.len(), cap });
        }
        let mut local = vec![usize::MAX; graph.n()];
        for (i, &v) in comp.iter().enumerate() {
            local[v] = i;
        }
        let mut adj = vec![0u64; comp.len()];
        for (i, &v) in comp.iter().enumerate() {
            for &(w, e) in graph.neighbors(v) {
                if keep(e) {
                    adj[i] |= 1u64 << local[w];
                }
            }
        }
        let chosen = BranchAndBound::solve(&adj);
        cover.extend(bits(chosen).map(|i| comp[i]));
    }
    Ok(VertexCover::new(cover))
}

/// Connected components with at least one kept edge, vertices ascending.
fn components(graph: &Graph, keep: &impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let mut seen = vec![false; graph.n()];
    let mut out = Vec::new();
    for s in 0..graph.n() {
        if seen[s] || !has_edge(graph, s, keep) {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let v = comp[i];
            i += 1;
            for &(w, e) in graph.neighbors(v) {
                if keep(e) && !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn bits(mut x: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if x == 0 {
            None
        } else {
            let i = x.trailing_zeros() as usize;
            x &= x - 1;
            Some(i)
        }
    })
}

struct BranchAndBound<'a> {
    adj: &'a [u64],
    best_size: u32,
    best: u64,
}

impl<'a> BranchAndBound<'a> {
    fn solve(adj: &'a [u64]) -> u64 {
        let all = if adj.len() == 64 { u64::MAX } else { (1u64 << adj.len()) - 1 };
        let mut bb = BranchAndBound { adj, best_size: all.count_ones(), best: all };
        bb.search(all, 0);
        bb.best
    }

    fn search(&mut self, mut alive: u64, mut chosen: u64) {
        // Reductions to a fixpoint.
        loop {
            let mut changed = false;
            for v in bits(alive) {
                if alive & (1 << v) == 0 {
                    continue;
                }
                let nb = self.adj[v] & alive;
                match nb.count_ones() {
                    0 => {
                        alive &= !(1 << v);
                        changed = true;
                    }
                    1 => {
                        chosen |= nb;
                        alive &= !(nb | (1 << v));
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }
        let size = chosen.count_ones();
        if size >= self.best_size {
            return;
        }
        if alive == 0 {
            self.best_size = size;
            self.best = chosen;
            return;
        }
        if size + self.matching_bound(alive) >= self.best_size {
            return;
        }
        let v = bits(alive).max_by_key(|&v| ((self.adj[v] & alive).count_ones(), std::cmp::Reverse(v))).unwrap();
        let nb = self.adj[v] & alive;
        self.search(alive & !(1 << v), chosen | (1 << v));
        self.search(alive & !(nb | (1 << v)), chosen | nb);
    }

    fn matching_bound(&self, alive: u64) -> u32 {
        let mut free = alive;
        let mut count = 0;
        for v in bits(alive) {
            if free & (1 << v) == 0 {
                continue;
            }
            let nb = self.adj[v] & free & !(1 << v);
            if nb != 0 {
                let w = nb.trailing_zeros();
                free &= !((1 << v) | (1u64 << w));
                count += 1;
            }
        }
        count
    }
}

/// Maximum matching size of a small general graph by exhaustive branching.
/// Applied per component; each component must have at most 64 vertices.
pub fn max_matching_size_small(graph: &Graph, keep: impl Fn(usize) -> bool) -> Result<usize> {
    let mut total = 0;
    for comp in components(graph, &keep) {
        if comp.len() > BITSET_LIMIT {
            return Err(Error::Capacity { what: "connected component".into(), size: comp.len(), cap: BITSET_LIMIT });
        }
        let mut local = vec![usize::MAX; graph.n()];
        for (i, &v) in comp.iter().enumerate() {
            local[v] = i;
        }
        let mut adj = vec![0u64; comp.len()];
        for (i, &v) in comp.iter().enumerate() {
            for &(w, e) in graph.neighbors(v) {
                if keep(e) {
                    adj[i] |= 1u64 << local[w];
                }
            }
        }
        let all = if comp.len() == 64 { u64::MAX } else { (1u64 << comp.len()) - 1 };
        total += matching_rec(&adj, all) as usize;
    }
    Ok(total)
}

fn matching_rec(adj: &[u64], alive: u64) -> u32 {
    // Lowest alive vertex with an alive neighbor: either it stays free or is
    // matched to one of those neighbors.
    let Some(v) = bits(alive).find(|&v| adj[v] & alive != 0) else { return 0 };
    let rest = alive & !(1 << v);
    let mut best = matching_rec(adj, rest);
    for w in bits(adj[v] & alive) {
        best = best.max(1 + matching_rec(adj, rest & !(1 << w)));
    }
    best
}

/// Scan edges in `order`, adding every edge whose endpoints are both free.
pub fn greedy_maximal_matching(graph: &Graph, order: &[usize]) -> Result<Matching> {
    let mut seen = vec![false; graph.m()];
    if order.len() != graph.m() || order.iter().any(|&e| e >= graph.m() || std::mem::replace(&mut seen[e], true)) {
        return Err(structural("order is not a permutation of the edge indices"));
    }
    Ok(greedy_masked(graph, order.iter().copied()))
}

pub(crate) fn greedy_masked(graph: &Graph, order: impl Iterator<Item = usize>) -> Matching {
    let mut used = vec![false; graph.n()];
    let mut edges = Vec::new();
    for e in order {
        let (u, v) = graph.edge(e);
        if !used[u] && !used[v] {
            used[u] = true;
            used[v] = true;
            edges.push(e);
        }
    }
    Matching::from_parts(graph, edges)
}

/// Flip every short augmenting path of `m1` found in `m1 Δ m2`.
///
/// Components of the symmetric difference are alternating paths and cycles.
/// A path with at most `max_len` edges that starts and ends with `m2` edges is
/// applied to `m1` when all of its `m2` edges are realized in `realized`.
pub fn augment_with_short_paths(
    graph: &Graph,
    m1: &Matching,
    m2: &Matching,
    realized: &Realization,
    max_len: usize,
) -> Result<Matching> {
    if max_len == 0 {
        return Err(Error::Parameter("max_len must be at least 1".into()));
    }
    realized.check_parent(graph)?;
    let m1 = Matching::from_edges(graph, m1.edges().to_vec())?;
    let m2 = Matching::from_edges(graph, m2.edges().to_vec())?;

    // In the symmetric difference each vertex has at most one edge from each side.
    let n = graph.n();
    let mut d1 = vec![None; n];
    let mut d2 = vec![None; n];
    for &e in m1.edges() {
        if !m2.contains(e) {
            let (u, v) = graph.edge(e);
            d1[u] = Some(e);
            d1[v] = Some(e);
        }
    }
    for &e in m2.edges() {
        if !m1.contains(e) {
            let (u, v) = graph.edge(e);
            d2[u] = Some(e);
            d2[v] = Some(e);
        }
    }

    let mut visited = vec![false; n];
    let mut result: Vec<usize> = m1.edges().to_vec();
    let mut add = Vec::new();
    let mut remove = Vec::new();
    for start in 0..n {
        // Path endpoints of degree one in D whose single edge is from m2.
        if visited[start] || d1[start].is_some() || d2[start].is_none() {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        let mut use_m2 = true;
        visited[v] = true;
        loop {
            let next = if use_m2 { d2[v] } else { d1[v] };
            let Some(e) = next else { break };
            path.push(e);
            let (a, b) = graph.edge(e);
            v = if a == v { b } else { a };
            visited[v] = true;
            use_m2 = !use_m2;
        }
        let ends_with_m2 = path.len() % 2 == 1;
        if !ends_with_m2 || path.len() > max_len {
            continue;
        }
        if path.iter().step_by(2).all(|&e| realized.is_realized(e)) {
            for (i, &e) in path.iter().enumerate() {
                if i % 2 == 0 {
                    add.push(e);
                } else {
                    remove.push(e);
                }
            }
        }
    }
    remove.sort_unstable();
    result.retain(|e| remove.binary_search(e).is_err());
    result.extend(add);
    Matching::from_edges(graph, result)
}
