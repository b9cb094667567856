//! Proposal-based vertex-independent matching on bipartite graphs.
//!
//! Every `A` vertex `v` looks only at the realization status `R_v` of its own
//! edges, proposes along edge `e` with probability `Pr[e ∈ M_A | R_v]`, and
//! each `B` vertex accepts its lowest-index proposer. Since the proposal rows
//! of distinct `A` vertices depend on disjoint edge sets, the events "v
//! proposes" and "u is matched" are independent whenever `v` and `u` are not
//! adjacent.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{parameter, structural, Result};
use crate::graph::{bipartition, sample_realization, Bipartition, Graph, Realization};
use crate::matching::{greedy_masked, max_matching_masked, Matching};
use crate::rng::{coin, derive, derive_path, tag, unit_f64};

/// Largest edge count for which conditionals are enumerated exactly.
pub const EXACT_EDGE_LIMIT: usize = 20;

/// Deterministic base matching algorithm `A` run on the realized graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseMatcher {
    /// Hopcroft–Karp with index tie-breaking.
    Maximum,
    /// Greedy maximal matching in edge-index order.
    Greedy,
}

impl BaseMatcher {
    pub fn run(self, graph: &Graph, sides: &Bipartition, realized: &[bool]) -> Matching {
        match self {
            BaseMatcher::Maximum => max_matching_masked(graph, sides, realized),
            BaseMatcher::Greedy => greedy_masked(graph, (0..graph.m()).filter(|&e| realized[e])),
        }
    }
}

/// Realization status of the edges at one `A` vertex, in adjacency order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeStatusProfile {
    pub vertex: usize,
    pub realized: Vec<bool>,
}

impl EdgeStatusProfile {
    pub fn of(graph: &Graph, v: usize, realized: &[bool]) -> Self {
        EdgeStatusProfile { vertex: v, realized: graph.neighbors(v).iter().map(|&(_, e)| realized[e]).collect() }
    }

    fn bits(&self) -> u64 {
        self.realized.iter().enumerate().fold(0, |acc, (j, &r)| acc | ((r as u64) << j))
    }

    fn check(&self, graph: &Graph) -> Result<()> {
        if self.vertex >= graph.n() || self.realized.len() != graph.degree(self.vertex) {
            return Err(structural("profile does not match the vertex's incident edges"));
        }
        if self.realized.len() > 63 {
            return Err(parameter("profiles support degree at most 63"));
        }
        Ok(())
    }
}

/// Sampled `Pr[e ∈ M_A | R_v]` for each edge at `profile.vertex`, in
/// adjacency order. Edges at `v` are fixed by the profile and all other edges
/// are drawn fresh.
pub fn conditional_match_probs(
    graph: &Graph,
    sides: &Bipartition,
    base: BaseMatcher,
    p: f64,
    profile: &EdgeStatusProfile,
    t: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    profile.check(graph)?;
    sides.validate(graph)?;
    if t == 0 {
        return Err(parameter("sample count must be positive"));
    }
    let v = profile.vertex;
    let incident = graph.neighbors(v);
    let mut fixed: Vec<Option<bool>> = vec![None; graph.m()];
    for (j, &(_, e)) in incident.iter().enumerate() {
        fixed[e] = Some(profile.realized[j]);
    }
    let counts = (0..t as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; incident.len()],
            |mut acc, s| {
                let s_seed = derive_path(seed, &[tag::CONDITIONAL, s]);
                let realized: Vec<bool> =
                    (0..graph.m()).map(|e| fixed[e].unwrap_or_else(|| coin(s_seed, e as u64, p))).collect();
                let m = base.run(graph, sides, &realized);
                if let Some(j) = incident.iter().position(|&(_, e)| m.contains(e)) {
                    acc[j] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; incident.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(normalize(counts.iter().map(|&c| c as f64 / t as f64).collect()))
}

/// Clamp to `[0, 1]` and rescale if the row mass exceeds 1.
fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    row.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    let total: f64 = row.iter().sum();
    if total > 1.0 {
        row.iter_mut().for_each(|x| *x /= total);
    }
    row
}

/// Source of conditional proposal rows.
pub enum ConditionalModel {
    /// Full enumeration over all realizations; rows indexed by profile bits.
    Exact { rows: Vec<HashMap<u64, Vec<f64>>> },
    /// Per-(vertex, profile) sampled rows, computed on first use with a seed
    /// derived from the profile so every row is a fixed function of it.
    Sampled { samples: usize, seed: u64, cache: Mutex<HashMap<(usize, u64), Vec<f64>>> },
}

pub struct VimModel {
    graph: Graph,
    sides: Bipartition,
    base: BaseMatcher,
    p: f64,
    conditionals: ConditionalModel,
}

impl VimModel {
    /// Exact conditionals when `m ≤ 20`, sampled otherwise.
    pub fn new(graph: &Graph, base: BaseMatcher, p: f64, samples: usize, seed: u64) -> Result<Self> {
        if graph.m() <= EXACT_EDGE_LIMIT {
            Self::exact(graph, base, p)
        } else {
            Self::sampled(graph, base, p, samples, seed)
        }
    }

    pub fn exact(graph: &Graph, base: BaseMatcher, p: f64) -> Result<Self> {
        let sides = check_inputs(graph, p)?;
        if graph.m() > EXACT_EDGE_LIMIT {
            return Err(crate::Error::Capacity {
                what: "exact conditional enumeration edges".into(),
                size: graph.m(),
                cap: EXACT_EDGE_LIMIT,
            });
        }
        let rows = exact_rows(graph, &sides, base, p);
        Ok(VimModel { graph: graph.clone(), sides, base, p, conditionals: ConditionalModel::Exact { rows } })
    }

    pub fn sampled(graph: &Graph, base: BaseMatcher, p: f64, samples: usize, seed: u64) -> Result<Self> {
        let sides = check_inputs(graph, p)?;
        if samples == 0 {
            return Err(parameter("sample count must be positive"));
        }
        if graph.max_degree() > 63 {
            return Err(parameter("sampled conditionals support degree at most 63"));
        }
        let conditionals = ConditionalModel::Sampled { samples, seed, cache: Mutex::new(HashMap::new()) };
        Ok(VimModel { graph: graph.clone(), sides, base, p, conditionals })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn sides(&self) -> &Bipartition {
        &self.sides
    }

    /// Proposal row for `profile.vertex`, indexed like its adjacency list.
    pub fn row(&self, profile: &EdgeStatusProfile) -> Result<Vec<f64>> {
        profile.check(&self.graph)?;
        if !self.sides.is_a(profile.vertex) {
            return Err(structural("only A vertices propose"));
        }
        let bits = profile.bits();
        match &self.conditionals {
            ConditionalModel::Exact { rows } => {
                Ok(rows[profile.vertex].get(&bits).cloned().unwrap_or_else(|| vec![0.0; profile.realized.len()]))
            }
            ConditionalModel::Sampled { samples, seed, cache } => {
                if let Some(r) = cache.lock().unwrap().get(&(profile.vertex, bits)) {
                    return Ok(r.clone());
                }
                let s = derive_path(*seed, &[profile.vertex as u64, bits]);
                let r = conditional_match_probs(&self.graph, &self.sides, self.base, self.p, profile, *samples, s)?;
                cache.lock().unwrap().insert((profile.vertex, bits), r.clone());
                Ok(r)
            }
        }
    }

    /// Proposal table for one realization.
    pub fn table(&self, realization: &Realization) -> Result<ProposalTable> {
        realization.check_parent(&self.graph)?;
        let mut rows = vec![Vec::new(); self.graph.n()];
        for v in self.sides.vertices(crate::graph::Side::A) {
            let row = self.row(&EdgeStatusProfile::of(&self.graph, v, realization.mask()))?;
            rows[v] = self.graph.neighbors(v).iter().zip(row).map(|(&(_, e), q)| (e, q)).collect();
        }
        Ok(ProposalTable { rows })
    }
}

fn check_inputs(graph: &Graph, p: f64) -> Result<Bipartition> {
    if !(0.0..=1.0).contains(&p) {
        return Err(parameter(format!("p must lie in [0,1], got {p}")));
    }
    bipartition(graph).ok_or_else(|| crate::Error::NotBipartite("vertex-independent matching".into()))
}

fn exact_rows(graph: &Graph, sides: &Bipartition, base: BaseMatcher, p: f64) -> Vec<HashMap<u64, Vec<f64>>> {
    let m = graph.m();
    let weight: Vec<f64> = (0..=m).map(|k| p.powi(k as i32) * (1.0 - p).powi((m - k) as i32)).collect();
    let a_vertices: Vec<usize> = sides.vertices(crate::graph::Side::A).collect();
    let new_acc = || -> Vec<Vec<f64>> {
        // per A vertex: 2^deg buckets of (total weight, weight per incident edge)
        a_vertices.iter().map(|&v| vec![0.0; (1usize << graph.degree(v)) * (1 + graph.degree(v))]).collect()
    };
    let total = 1u64 << m;
    let chunks = 64u64.min(total);
    let per_chunk = total.div_ceil(chunks);
    let partials: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = new_acc();
            let mut realized = vec![false; m];
            for r in c * per_chunk..((c + 1) * per_chunk).min(total) {
                for (e, x) in realized.iter_mut().enumerate() {
                    *x = r >> e & 1 == 1;
                }
                let w = weight[r.count_ones() as usize];
                let matched = base.run(graph, sides, &realized);
                for (i, &v) in a_vertices.iter().enumerate() {
                    let d = graph.degree(v);
                    let bits = graph
                        .neighbors(v)
                        .iter()
                        .enumerate()
                        .fold(0usize, |b, (j, &(_, e))| b | ((realized[e] as usize) << j));
                    let slot = &mut acc[i][bits * (1 + d)..(bits + 1) * (1 + d)];
                    slot[0] += w;
                    if let Some(j) = graph.neighbors(v).iter().position(|&(_, e)| matched.contains(e)) {
                        slot[1 + j] += w;
                    }
                }
            }
            acc
        })
        .collect();
    let mut sum = new_acc();
    for part in partials {
        for (s, x) in sum.iter_mut().zip(part) {
            s.iter_mut().zip(x).for_each(|(a, b)| *a += b);
        }
    }
    let mut rows = vec![HashMap::new(); graph.n()];
    for (i, &v) in a_vertices.iter().enumerate() {
        let d = graph.degree(v);
        for bits in 0..1usize << d {
            let slot = &sum[i][bits * (1 + d)..(bits + 1) * (1 + d)];
            if slot[0] > 0.0 {
                rows[v].insert(bits as u64, normalize(slot[1..].iter().map(|&x| x / slot[0]).collect()));
            }
        }
    }
    rows
}

/// Per-`A`-vertex proposal distributions over incident edges; the remaining
/// mass is "no proposal".
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalTable {
    /// `rows[v]` holds `(edge, probability)` pairs; empty for `B` vertices.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl ProposalTable {
    pub fn proposal_mass(&self, v: usize) -> f64 {
        self.rows[v].iter().map(|&(_, q)| q).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VimOutcome {
    pub matching: Matching,
    pub proposals: Vec<Option<usize>>,
}

/// One round of proposals and lowest-index acceptance.
pub fn vim_round(graph: &Graph, realization: &Realization, table: &ProposalTable, seed: u64) -> Result<VimOutcome> {
    realization.check_parent(graph)?;
    if table.rows.len() != graph.n() {
        return Err(structural("proposal table does not match the graph"));
    }
    let mut proposals = vec![None; graph.n()];
    let mut winner: Vec<Option<(usize, usize)>> = vec![None; graph.n()];
    for v in 0..graph.n() {
        let row = &table.rows[v];
        if row.is_empty() {
            continue;
        }
        if row.iter().any(|&(_, q)| !(0.0..=1.0 + 1e-9).contains(&q)) || table.proposal_mass(v) > 1.0 + 1e-9 {
            return Err(structural(format!("proposal row of vertex {v} is not a distribution")));
        }
        let u = unit_f64(derive_path(seed, &[tag::PROPOSAL, v as u64]));
        let mut acc = 0.0;
        for &(e, q) in row {
            acc += q;
            if u < acc {
                if !realization.is_realized(e) {
                    return Err(structural(format!("vertex {v} proposed along unrealized edge {e}")));
                }
                proposals[v] = Some(e);
                let (a, b) = graph.edge(e);
                let target = if a == v { b } else { a };
                if winner[target].is_none() {
                    winner[target] = Some((v, e));
                }
                break;
            }
        }
    }
    let edges = winner.into_iter().flatten().map(|(_, e)| e).collect();
    Ok(VimOutcome { matching: Matching::from_parts(graph, edges), proposals })
}

/// Keep each edge independently with probability `1 − ε`.
pub fn downsample_matching(graph: &Graph, m: &Matching, epsilon: f64, seed: u64) -> Result<Matching> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(parameter(format!("epsilon must lie in [0,1], got {epsilon}")));
    }
    let s = derive(seed, tag::DOWNSAMPLE);
    let kept = m.edges().iter().copied().filter(|&e| coin(s, e as u64, 1.0 - epsilon)).collect();
    Ok(Matching::from_parts(graph, kept))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairCovariance {
    pub a: usize,
    pub b: usize,
    pub adjacent: bool,
    /// Empirical covariance of `a proposes` and `b ∈ M_B`.
    pub covariance: f64,
}

/// Aggregates of repeated full runs: realization, base matching, proposals.
#[derive(Clone, Debug, PartialEq)]
pub struct IndependenceStats {
    pub trials: usize,
    pub mean_size_a: f64,
    pub mean_size_b: f64,
    /// Mean and standard error of `|M_B| − (1 − 1/e)|M_A|`.
    pub size_gap_mean: f64,
    pub size_gap_se: f64,
    pub pr_propose: Vec<f64>,
    pub pr_in_a: Vec<f64>,
    pub pr_in_b: Vec<f64>,
    /// Standard error of the per-trial difference `1[v proposes] − 1[v ∈ M_A]`
    /// for `A` vertices and `1[u ∈ M_B] − 1[u ∈ M_A]` for `B` vertices.
    pub dominance_se: Vec<f64>,
    pub pairs: Vec<PairCovariance>,
}

#[derive(Clone, Default)]
struct Counts {
    size_a: u64,
    size_b: u64,
    gap_sq: f64,
    propose: Vec<u64>,
    in_a: Vec<u64>,
    in_b: Vec<u64>,
    diff_abs: Vec<u64>,
    joint: Vec<u64>,
}

/// Run `trials` independent realizations through the base matcher and the
/// proposal round, with rows taken from `model`.
pub fn independence_stats(model: &VimModel, trials: usize, seed: u64) -> Result<IndependenceStats> {
    if trials == 0 {
        return Err(parameter("trial count must be positive"));
    }
    let graph = &model.graph;
    let n = graph.n();
    let a_list: Vec<usize> = model.sides.vertices(crate::graph::Side::A).collect();
    let b_list: Vec<usize> = model.sides.vertices(crate::graph::Side::B).collect();
    let nb = b_list.len();
    let mut b_index = vec![usize::MAX; n];
    for (i, &u) in b_list.iter().enumerate() {
        b_index[u] = i;
    }
    let zero = || Counts {
        propose: vec![0; n],
        in_a: vec![0; n],
        in_b: vec![0; n],
        diff_abs: vec![0; n],
        joint: vec![0; a_list.len() * nb],
        ..Default::default()
    };
    let c1 = 1.0 - (-1.0f64).exp();
    let chunks = 64usize.min(trials);
    let per_chunk = trials.div_ceil(chunks);
    let partials: Vec<Counts> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Counts> {
            let mut acc = zero();
            for i in c * per_chunk..((c + 1) * per_chunk).min(trials) {
                let trial_seed = derive_path(seed, &[tag::TRIAL, i as u64]);
                let r = sample_realization(graph, model.p, trial_seed);
                let ma = model.base.run(graph, &model.sides, r.mask());
                let table = model.table(&r)?;
                let out = vim_round(graph, &r, &table, trial_seed)?;
                acc.size_a += ma.size() as u64;
                acc.size_b += out.matching.size() as u64;
                let gap = out.matching.size() as f64 - c1 * ma.size() as f64;
                acc.gap_sq += gap * gap;
                for v in 0..n {
                    let in_a = ma.is_matched(v);
                    let in_b = out.matching.is_matched(v);
                    let x = if model.sides.is_a(v) { out.proposals[v].is_some() } else { in_b };
                    acc.in_a[v] += in_a as u64;
                    acc.in_b[v] += in_b as u64;
                    acc.propose[v] += out.proposals[v].is_some() as u64;
                    acc.diff_abs[v] += (x != in_a) as u64;
                }
                for (ai, &v) in a_list.iter().enumerate() {
                    if out.proposals[v].is_some() {
                        for &u in &b_list {
                            if out.matching.is_matched(u) {
                                acc.joint[ai * nb + b_index[u]] += 1;
                            }
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = zero();
    for part in partials {
        total.size_a += part.size_a;
        total.size_b += part.size_b;
        total.gap_sq += part.gap_sq;
        for (dst, src) in [
            (&mut total.propose, part.propose),
            (&mut total.in_a, part.in_a),
            (&mut total.in_b, part.in_b),
            (&mut total.diff_abs, part.diff_abs),
            (&mut total.joint, part.joint),
        ] {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
    }
    let tf = trials as f64;
    let freq = |v: &[u64]| v.iter().map(|&c| c as f64 / tf).collect::<Vec<_>>();
    let pr_propose = freq(&total.propose);
    let pr_in_a = freq(&total.in_a);
    let pr_in_b = freq(&total.in_b);
    let mean_size_a = total.size_a as f64 / tf;
    let mean_size_b = total.size_b as f64 / tf;
    let size_gap_mean = mean_size_b - c1 * mean_size_a;
    let size_gap_se = ((total.gap_sq / tf - size_gap_mean * size_gap_mean).max(0.0) / tf).sqrt();
    let dominance_se = (0..n)
        .map(|v| {
            let x = if model.sides.is_a(v) { pr_propose[v] } else { pr_in_b[v] };
            let mean = x - pr_in_a[v];
            let second = total.diff_abs[v] as f64 / tf;
            ((second - mean * mean).max(0.0) / tf).sqrt()
        })
        .collect();
    let mut pairs = Vec::with_capacity(a_list.len() * nb);
    for (ai, &v) in a_list.iter().enumerate() {
        for (bi, &u) in b_list.iter().enumerate() {
            let joint = total.joint[ai * nb + bi] as f64 / tf;
            pairs.push(PairCovariance {
                a: v,
                b: u,
                adjacent: graph.find_edge(v, u).is_some(),
                covariance: joint - pr_propose[v] * pr_in_b[u],
            });
        }
    }
    Ok(IndependenceStats {
        trials,
        mean_size_a,
        mean_size_b,
        size_gap_mean,
        size_gap_se,
        pr_propose,
        pr_in_a,
        pr_in_b,
        dominance_se,
        pairs,
    })
}
