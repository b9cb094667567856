//! Instance families: the lower-bound constructions and random test graphs.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::error::{parameter, Result};
use crate::format::write_graph;
use crate::graph::Graph;
use crate::rng::{chacha, derive, tag};

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `S(d, s, N)`: `N × N` circulant `d`-regular bipartite core, `s` pendants per core vertex.
    Sdn {
        d: usize,
        s: usize,
        n_core: usize,
    },
    /// Complete bipartite core on `core` vertices plus a matching on the
    /// remaining `n − core` vertices, cross-linked to opposite core sides.
    Layered {
        n: usize,
        core: usize,
    },
    RegularBipartite {
        n: usize,
        d: usize,
    },
    Clique {
        n: usize,
    },
    PerfectMatching {
        n: usize,
    },
    ErBipartite {
        na: usize,
        nb: usize,
        q: f64,
    },
    Er {
        n: usize,
        q: f64,
    },
}

impl Family {
    pub fn id(&self) -> &'static str {
        match self {
            Family::Sdn { .. } => "sdn",
            Family::Layered { .. } => "layered",
            Family::RegularBipartite { .. } => "regular_bipartite",
            Family::Clique { .. } => "clique",
            Family::PerfectMatching { .. } => "perfect_matching",
            Family::ErBipartite { .. } => "er_bipartite",
            Family::Er { .. } => "er",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, String)> {
        match *self {
            Family::Sdn { d, s, n_core } => vec![("d", d.to_string()), ("s", s.to_string()), ("N", n_core.to_string())],
            Family::Layered { n, core } => vec![("n", n.to_string()), ("N", core.to_string())],
            Family::RegularBipartite { n, d } => vec![("n", n.to_string()), ("d", d.to_string())],
            Family::Clique { n } | Family::PerfectMatching { n } => vec![("n", n.to_string())],
            Family::ErBipartite { na, nb, q } => {
                vec![("na", na.to_string()), ("nb", nb.to_string()), ("q", q.to_string())]
            }
            Family::Er { n, q } => vec![("n", n.to_string()), ("q", q.to_string())],
        }
    }

    /// Parse `id` plus `k=v,k=v` parameters.
    pub fn parse(id: &str, params: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for item in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| parameter(format!("malformed parameter '{item}'")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let int = |k: &str| -> Result<usize> {
            kv.get(k)
                .ok_or_else(|| parameter(format!("family {id} needs parameter {k}")))?
                .parse()
                .map_err(|_| parameter(format!("parameter {k} must be a non-negative integer")))
        };
        let real = |k: &str| -> Result<f64> {
            kv.get(k)
                .ok_or_else(|| parameter(format!("family {id} needs parameter {k}")))?
                .parse()
                .map_err(|_| parameter(format!("parameter {k} must be a number")))
        };
        let family = match id {
            "sdn" => Family::Sdn { d: int("d")?, s: int("s")?, n_core: int("N")? },
            "layered" => Family::Layered { n: int("n")?, core: int("N")? },
            "regular_bipartite" => Family::RegularBipartite { n: int("n")?, d: int("d")? },
            "clique" => Family::Clique { n: int("n")? },
            "perfect_matching" => Family::PerfectMatching { n: int("n")? },
            "er_bipartite" => Family::ErBipartite { na: int("na")?, nb: int("nb")?, q: real("q")? },
            "er" => Family::Er { n: int("n")?, q: real("q")? },
            other => return Err(parameter(format!("unknown family '{other}'"))),
        };
        let known: Vec<&str> = family.params().iter().map(|(k, _)| *k).collect();
        if let Some(extra) = kv.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(parameter(format!("family {id} has no parameter {extra}")));
        }
        Ok(family)
    }

    /// Parse the inline form `id:k=v,k=v`.
    pub fn parse_inline(spec: &str) -> Result<Self> {
        let (id, params) = spec.split_once(':').unwrap_or((spec, ""));
        Self::parse(id.trim(), params)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}:{}", self.id(), params.join(","))
    }
}

#[derive(Clone, Debug)]
pub struct InstanceDescriptor {
    pub family: Family,
    pub seed: u64,
    pub graph: Graph,
    /// When set, vertices `0..k` form side `A` of a bipartition.
    pub side_a_prefix: Option<usize>,
    /// Named vertex groups, e.g. `core` and `pendant`.
    pub roles: BTreeMap<&'static str, Vec<usize>>,
}

impl InstanceDescriptor {
    /// Identifier safe for CSV cells, e.g. `sdn_d3_s5_N6`.
    pub fn name(&self) -> String {
        let mut s = self.family.id().to_string();
        for (k, v) in self.family.params() {
            s.push('_');
            s.push_str(k);
            s.push_str(&v);
        }
        if matches!(self.family, Family::ErBipartite { .. } | Family::Er { .. }) {
            s.push_str(&format!("_seed{}", self.seed));
        }
        s
    }

    /// `# family=<id> params=<k=v,...> seed=<seed>`
    pub fn sidecar_line(&self) -> String {
        let params: Vec<String> = self.family.params().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("family={} params={} seed={}", self.family.id(), params.join(","), self.seed)
    }

    /// Graph text with the bipartite hint and the descriptor line.
    pub fn to_text(&self) -> String {
        write_graph(&self.graph, self.side_a_prefix, &[self.sidecar_line()])
    }

    /// Rebuild from a descriptor line as written by [`Self::sidecar_line`].
    pub fn from_sidecar(line: &str) -> Result<Self> {
        let line = line.trim_start_matches('#').trim();
        let mut id = None;
        let mut params = "";
        let mut seed = 0u64;
        for part in line.split_whitespace() {
            if let Some(v) = part.strip_prefix("family=") {
                id = Some(v);
            } else if let Some(v) = part.strip_prefix("params=") {
                params = v;
            } else if let Some(v) = part.strip_prefix("seed=") {
                seed = v.parse().map_err(|_| parameter(format!("bad seed '{v}'")))?;
            }
        }
        let id = id.ok_or_else(|| parameter("descriptor line has no family"))?;
        generate(&Family::parse(id, params)?, seed)
    }
}

pub fn generate(family: &Family, seed: u64) -> Result<InstanceDescriptor> {
    match *family {
        Family::Sdn { d, s, n_core } => gen_sdn(d, s, n_core, seed),
        Family::Layered { n, core } => gen_layered_counterexample(n, core, seed),
        Family::RegularBipartite { n, d } => gen_regular_bipartite(n, d, seed),
        Family::Clique { n } => gen_clique(n),
        Family::PerfectMatching { n } => gen_perfect_matching(n),
        Family::ErBipartite { na, nb, q } => gen_er_bipartite(na, nb, q, seed),
        Family::Er { n, q } => gen_er(n, q, seed),
    }
}

fn descriptor(
    family: Family,
    seed: u64,
    graph: Graph,
    side_a_prefix: Option<usize>,
    roles: Vec<(&'static str, Vec<usize>)>,
) -> InstanceDescriptor {
    InstanceDescriptor { family, seed, graph, side_a_prefix, roles: roles.into_iter().collect() }
}

/// Vertex layout: left core `0..N`, pendants of the right core, right core,
/// pendants of the left core. Side `A` is the first `N(s+1)` vertices.
pub fn gen_sdn(d: usize, s: usize, n_core: usize, seed: u64) -> Result<InstanceDescriptor> {
    if d == 0 || d > n_core {
        return Err(parameter(format!("sdn needs 1 <= d <= N, got d={d}, N={n_core}")));
    }
    let nn = n_core;
    let right_pendant = |j: usize, k: usize| nn + j * s + k;
    let right = |j: usize| nn * (s + 1) + j;
    let left_pendant = |i: usize, k: usize| nn * (s + 2) + i * s + k;
    let mut edges = Vec::with_capacity(nn * d + 2 * nn * s);
    for i in 0..nn {
        for j in 0..d {
            edges.push((i, right((i + j) % nn)));
        }
    }
    for i in 0..nn {
        for k in 0..s {
            edges.push((i, left_pendant(i, k)));
        }
    }
    for j in 0..nn {
        for k in 0..s {
            edges.push((right_pendant(j, k), right(j)));
        }
    }
    let n = 2 * nn * (s + 1);
    let graph = Graph::new(n, edges)?;
    let core: Vec<usize> = (0..nn).chain((0..nn).map(right)).collect();
    let pendant: Vec<usize> = (0..n).filter(|&v| graph.degree(v) == 1 && !core.contains(&v)).collect();
    Ok(descriptor(
        Family::Sdn { d, s, n_core },
        seed,
        graph,
        Some(nn * (s + 1)),
        vec![("core", core), ("pendant", pendant)],
    ))
}

/// Pendant count `max(1, round(log(1/N) / log(1−p)))`.
pub fn sdn_pendant_count(n_core: usize, p: f64) -> usize {
    if p >= 1.0 || n_core <= 1 {
        return 1;
    }
    let s = ((1.0 / n_core as f64).ln() / (1.0 - p).ln()).round();
    (s as usize).max(1)
}

/// Vertex layout: core side `L`, the `v_i`, core side `R`, the `u_i`.
/// `u_i` is joined to all of `L` and `v_i` to all of `R`.
pub fn gen_layered_counterexample(n: usize, core: usize, seed: u64) -> Result<InstanceDescriptor> {
    if core == 0 || !core.is_multiple_of(2) || n <= core || !(n - core).is_multiple_of(2) {
        return Err(parameter(format!("layered needs n > N, N even and n - N even, got n={n}, N={core}")));
    }
    let h = core / 2;
    let k = (n - core) / 2;
    let l = |i: usize| i;
    let v = |i: usize| h + i;
    let r = |i: usize| h + k + i;
    let u = |i: usize| core + k + i;
    let mut edges = Vec::with_capacity(h * h + k + 2 * k * h);
    for a in 0..h {
        for b in 0..h {
            edges.push((l(a), r(b)));
        }
    }
    for i in 0..k {
        edges.push((v(i), u(i)));
    }
    for i in 0..k {
        for a in 0..h {
            edges.push((l(a), u(i)));
        }
        for b in 0..h {
            edges.push((v(i), r(b)));
        }
    }
    let graph = Graph::new(n, edges)?;
    Ok(descriptor(
        Family::Layered { n, core },
        seed,
        graph,
        Some(h + k),
        vec![
            ("core", (0..h).map(l).chain((0..h).map(r)).collect()),
            ("matching_u", (0..k).map(u).collect()),
            ("matching_v", (0..k).map(v).collect()),
        ],
    ))
}

/// Circulant `d`-regular bipartite graph on `n/2 + n/2` vertices.
pub fn gen_regular_bipartite(n: usize, d: usize, seed: u64) -> Result<InstanceDescriptor> {
    if !n.is_multiple_of(2) || d > n / 2 {
        return Err(parameter(format!("regular_bipartite needs even n and d <= n/2, got n={n}, d={d}")));
    }
    let h = n / 2;
    let edges = (0..h).flat_map(|i| (0..d).map(move |j| (i, h + (i + j) % h))).collect();
    let graph = Graph::new(n, edges)?;
    Ok(descriptor(Family::RegularBipartite { n, d }, seed, graph, Some(h), Vec::new()))
}

pub fn gen_clique(n: usize) -> Result<InstanceDescriptor> {
    let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let graph = Graph::new(n, edges)?;
    let prefix = (n <= 2).then_some(n.min(1));
    Ok(descriptor(Family::Clique { n }, 0, graph, prefix, Vec::new()))
}

/// Edges `(i, n/2 + i)`.
pub fn gen_perfect_matching(n: usize) -> Result<InstanceDescriptor> {
    if !n.is_multiple_of(2) {
        return Err(parameter(format!("perfect_matching needs even n, got {n}")));
    }
    let h = n / 2;
    let graph = Graph::new(n, (0..h).map(|i| (i, h + i)).collect())?;
    Ok(descriptor(Family::PerfectMatching { n }, 0, graph, Some(h), Vec::new()))
}

fn check_edge_prob(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(parameter(format!("edge probability must lie in [0,1], got {q}")));
    }
    Ok(())
}

pub fn gen_er_bipartite(na: usize, nb: usize, q: f64, seed: u64) -> Result<InstanceDescriptor> {
    check_edge_prob(q)?;
    let mut rng = chacha(derive(seed, tag::GENERATOR));
    let mut edges = Vec::new();
    for a in 0..na {
        for b in 0..nb {
            if rng.random_bool(q) {
                edges.push((a, na + b));
            }
        }
    }
    let graph = Graph::new(na + nb, edges)?;
    Ok(descriptor(Family::ErBipartite { na, nb, q }, seed, graph, Some(na), Vec::new()))
}

pub fn gen_er(n: usize, q: f64, seed: u64) -> Result<InstanceDescriptor> {
    check_edge_prob(q)?;
    let mut rng = chacha(derive(seed, tag::GENERATOR));
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(q) {
                edges.push((a, b));
            }
        }
    }
    let graph = Graph::new(n, edges)?;
    Ok(descriptor(Family::Er { n, q }, seed, graph, None, Vec::new()))
}

/// Standard test corpus covering every family, sized so that exact optima
/// stay cheap.
pub fn corpus() -> Vec<InstanceDescriptor> {
    let families = [
        (Family::Sdn { d: 1, s: 1, n_core: 3 }, 0),
        (Family::Sdn { d: 3, s: 2, n_core: 4 }, 0),
        (Family::Sdn { d: 4, s: 1, n_core: 4 }, 0),
        (Family::Layered { n: 8, core: 4 }, 0),
        (Family::Layered { n: 24, core: 8 }, 0),
        (Family::RegularBipartite { n: 20, d: 3 }, 0),
        (Family::RegularBipartite { n: 30, d: 4 }, 0),
        (Family::PerfectMatching { n: 20 }, 0),
        (Family::ErBipartite { na: 15, nb: 15, q: 0.2 }, 1),
        (Family::ErBipartite { na: 10, nb: 12, q: 0.3 }, 2),
        (Family::Clique { n: 4 }, 0),
        (Family::Clique { n: 8 }, 0),
        (Family::Er { n: 20, q: 0.2 }, 3),
        (Family::Er { n: 30, q: 0.1 }, 4),
    ];
    families.iter().map(|(f, seed)| generate(f, *seed).expect("corpus parameters are valid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_graph;
    use crate::graph::bipartition;

    #[test]
    fn sdn_counts() {
        let g = gen_sdn(3, 5, 6, 1).unwrap();
        assert_eq!(g.graph.n(), 72);
        assert_eq!(g.graph.m(), 78);
        for &v in &g.roles["core"] {
            assert_eq!(g.graph.degree(v), 3 + 5);
        }
        assert_eq!(g.roles["pendant"].len(), 60);
        for &v in &g.roles["pendant"] {
            assert_eq!(g.graph.degree(v), 1);
        }
        assert!(gen_sdn(7, 1, 6, 0).is_err());
    }

    #[test]
    fn sdn_with_full_degree_has_complete_core() {
        let g = gen_sdn(4, 2, 4, 0).unwrap();
        let core = &g.roles["core"];
        for &a in &core[..4] {
            for &b in &core[4..] {
                assert!(g.graph.find_edge(a, b).is_some());
            }
        }
    }

    #[test]
    fn side_prefix_is_a_valid_bipartition() {
        for inst in corpus() {
            if let Some(k) = inst.side_a_prefix {
                for &(u, v) in inst.graph.edges() {
                    assert!((u < k) != (v < k), "{}", inst.name());
                }
            }
        }
    }

    #[test]
    fn layered_counts() {
        let g = gen_layered_counterexample(8, 4, 0).unwrap();
        assert_eq!(g.graph.n(), 8);
        assert_eq!(g.graph.m(), 14);
        for &u in &g.roles["matching_u"] {
            assert_eq!(g.graph.degree(u), 4 / 2 + 1);
        }
        assert!(bipartition(&g.graph).is_some());
        assert!(gen_layered_counterexample(9, 4, 0).is_err());
        assert!(gen_layered_counterexample(8, 3, 0).is_err());
        assert!(gen_layered_counterexample(4, 4, 0).is_err());
    }

    #[test]
    fn layered_matching_remains_after_removing_core_and_cross() {
        let g = gen_layered_counterexample(20, 6, 0).unwrap();
        let us = &g.roles["matching_u"];
        let vs = &g.roles["matching_v"];
        let core = &g.roles["core"];
        let left: Vec<_> = g.graph.edges().iter().filter(|&&(a, b)| !core.contains(&a) && !core.contains(&b)).collect();
        assert_eq!(left.len(), 7);
        for &&(a, b) in &left {
            assert!(vs.contains(&a) && us.contains(&b));
        }
    }

    #[test]
    fn simple_families() {
        assert_eq!(gen_clique(5).unwrap().graph.m(), 10);
        let pm = gen_perfect_matching(10).unwrap();
        assert_eq!(pm.graph.m(), 5);
        assert_eq!(pm.graph.max_degree(), 1);
        let rb = gen_regular_bipartite(20, 3, 0).unwrap();
        assert!((0..20).all(|v| rb.graph.degree(v) == 3));
        assert!(gen_regular_bipartite(20, 11, 0).is_err());
        assert!(gen_er(5, 1.5, 0).is_err());
    }

    #[test]
    fn random_families_are_deterministic() {
        assert_eq!(gen_er(30, 0.2, 9).unwrap().graph, gen_er(30, 0.2, 9).unwrap().graph);
        assert_ne!(gen_er(30, 0.2, 9).unwrap().graph, gen_er(30, 0.2, 10).unwrap().graph);
        let a = gen_er_bipartite(10, 10, 0.5, 1).unwrap();
        assert!(bipartition(&a.graph).is_some());
        assert_eq!(gen_er(6, 1.0, 0).unwrap().graph.m(), 15);
    }

    #[test]
    fn sidecar_round_trip() {
        for inst in corpus() {
            let text = inst.to_text();
            let parsed = parse_graph(&text).unwrap();
            assert_eq!(parsed.graph, inst.graph);
            assert_eq!(parsed.bipartite_hint, inst.side_a_prefix);
            let again = InstanceDescriptor::from_sidecar(&inst.sidecar_line()).unwrap();
            assert_eq!(again.graph, inst.graph);
        }
    }

    #[test]
    fn inline_specs() {
        assert_eq!(Family::parse_inline("sdn:d=3,s=5,N=6").unwrap(), Family::Sdn { d: 3, s: 5, n_core: 6 });
        assert_eq!(Family::parse_inline("clique:n=4").unwrap().to_string(), "clique:n=4");
        assert!(Family::parse_inline("sdn:d=3").is_err());
        assert!(Family::parse_inline("clique:n=4,x=1").is_err());
        assert!(Family::parse_inline("nope:n=4").is_err());
    }

    #[test]
    fn pendant_count() {
        // log(1/16)/log(1/2) = 4
        assert_eq!(sdn_pendant_count(16, 0.5), 4);
        assert_eq!(sdn_pendant_count(1, 0.5), 1);
        assert_eq!(sdn_pendant_count(100, 1.0), 1);
    }

    #[test]
    fn corpus_spans_all_families() {
        let c = corpus();
        assert!(c.len() >= 12);
        for id in ["sdn", "layered", "regular_bipartite", "clique", "perfect_matching", "er_bipartite", "er"] {
            assert!(c.iter().any(|i| i.family.id() == id), "{id}");
        }
    }
}
