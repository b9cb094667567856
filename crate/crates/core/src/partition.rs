//! Iterative construction of a queried/unqueried edge split `(Q, S)` such that
//! a matching policy on `H = Q_p ∪ S` is near-maximum while every `S` edge has
//! a small marginal.
//!
//! Each round estimates edge marginals of the current policy by sampling,
//! promotes heavy `S` edges into `Q`, and stops once the heavy edges carry a
//! small share of the expected matching. Realizations are coupled across
//! rounds: sample `s` uses the same Bernoulli draw per edge in every round, so
//! the half-stochastic graphs shrink monotonically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{parameter, structural, Result};
use crate::graph::{bipartition, Bipartition, EdgePartition, Graph};
use crate::matching::{greedy_masked, max_matching_masked, max_matching_ranked, max_matching_size_small, Matching};
use crate::rng::{coin, derive, derive_path, tag, unit_f64};

/// Matching routine shared by every component of a policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Hopcroft–Karp maximum matching; requires a bipartite graph.
    Maximum,
    /// Greedy maximal matching in tie-break order.
    Greedy,
}

/// One deterministic matching procedure inside a mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyComponent {
    pub weight: f64,
    /// Queried edges of the half-stochastic graph this component matches on.
    pub view_q: Vec<usize>,
    /// Seed of the tie-breaking permutation; 0 means edge-index order.
    pub tie_break: u64,
    /// Edges removed from the component's output.
    pub exclude: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingPolicy {
    pub matcher: Matcher,
    pub components: Vec<PolicyComponent>,
}

impl MatchingPolicy {
    /// Single deterministic component matching on `Q_p ∪ S` for `partition`.
    pub fn single(matcher: Matcher, partition: &EdgePartition, tie_break: u64) -> Self {
        MatchingPolicy {
            matcher,
            components: vec![PolicyComponent {
                weight: 1.0,
                view_q: partition.q_edges(),
                tie_break,
                exclude: Vec::new(),
            }],
        }
    }

    /// The ½–½ mixture of two policies.
    pub fn mix(a: &MatchingPolicy, b: &MatchingPolicy) -> Result<Self> {
        if a.matcher != b.matcher {
            return Err(structural("cannot mix policies with different matchers"));
        }
        let half = |c: &PolicyComponent| PolicyComponent { weight: c.weight / 2.0, ..c.clone() };
        Ok(MatchingPolicy {
            matcher: a.matcher,
            components: a.components.iter().chain(&b.components).map(half).collect(),
        })
    }

    /// Same policy with `edges` removed from every output.
    pub fn excluding(&self, edges: &[usize]) -> Self {
        let mut out = self.clone();
        for c in &mut out.components {
            c.exclude.extend_from_slice(edges);
            c.exclude.sort_unstable();
            c.exclude.dedup();
        }
        out
    }

    pub fn validate(&self, graph: &Graph, partition: &EdgePartition) -> Result<()> {
        if self.components.is_empty() {
            return Err(structural("policy has no components"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 || self.components.iter().any(|c| !(c.weight > 0.0)) {
            return Err(structural(format!("policy weights must be positive and sum to 1, got {total}")));
        }
        for c in &self.components {
            if c.view_q.iter().chain(&c.exclude).any(|&e| e >= graph.m()) {
                return Err(structural("policy references an edge outside the graph"));
            }
            let mut view = vec![false; graph.m()];
            for &e in &c.view_q {
                view[e] = true;
            }
            // The component's graph must be contained in the current H.
            if partition.q_edges().iter().any(|&e| !view[e]) {
                return Err(structural("policy view does not contain the partition's queried edges"));
            }
        }
        if self.matcher == Matcher::Maximum && bipartition(graph).is_none() {
            return Err(structural("maximum-matching policy needs a bipartite graph"));
        }
        Ok(())
    }

    fn index_of(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                return i;
            }
        }
        self.components.len() - 1
    }
}

/// A policy with per-component state precomputed for repeated runs.
struct PreparedPolicy<'a> {
    graph: &'a Graph,
    policy: &'a MatchingPolicy,
    sides: Option<Bipartition>,
    views: Vec<Vec<bool>>,
    ranks: Vec<Option<Vec<u32>>>,
    excludes: Vec<Vec<bool>>,
}

impl<'a> PreparedPolicy<'a> {
    fn new(graph: &'a Graph, policy: &'a MatchingPolicy) -> Self {
        let m = graph.m();
        let to_mask = |edges: &[usize]| {
            let mut mask = vec![false; m];
            for &e in edges {
                mask[e] = true;
            }
            mask
        };
        PreparedPolicy {
            graph,
            policy,
            sides: bipartition(graph),
            views: policy.components.iter().map(|c| to_mask(&c.view_q)).collect(),
            ranks: policy
                .components
                .iter()
                .map(|c| {
                    (c.tie_break != 0).then(|| (0..m).map(|e| (derive(c.tie_break, e as u64) >> 32) as u32).collect())
                })
                .collect(),
            excludes: policy.components.iter().map(|c| to_mask(&c.exclude)).collect(),
        }
    }

    fn run(&self, x: &[bool], selector: f64) -> Matching {
        let k = self.policy.index_of(selector);
        let view = &self.views[k];
        let present: Vec<bool> = (0..self.graph.m()).map(|e| !view[e] || x[e]).collect();
        let raw = match self.policy.matcher {
            Matcher::Maximum => {
                let sides = self.sides.as_ref().expect("validated bipartite");
                match &self.ranks[k] {
                    Some(r) => max_matching_ranked(self.graph, sides, &present, r),
                    None => max_matching_masked(self.graph, sides, &present),
                }
            }
            Matcher::Greedy => {
                let mut order: Vec<usize> = (0..self.graph.m()).filter(|&e| present[e]).collect();
                if let Some(r) = &self.ranks[k] {
                    order.sort_by_key(|&e| (r[e], e));
                }
                greedy_masked(self.graph, order.into_iter())
            }
        };
        let ex = &self.excludes[k];
        if raw.edges().iter().any(|&e| ex[e]) {
            Matching::from_parts(self.graph, raw.edges().iter().copied().filter(|&e| !ex[e]).collect())
        } else {
            raw
        }
    }
}

/// The coupled draw `X_e` for sample `s`.
fn coupled_draws(graph: &Graph, p: f64, seed: u64, s: u64) -> Vec<bool> {
    let sample_seed = derive_path(seed, &[tag::REALIZATION, s]);
    (0..graph.m()).map(|e| coin(sample_seed, e as u64, p)).collect()
}

fn selector(seed: u64, s: u64) -> f64 {
    unit_f64(derive_path(seed, &[tag::POLICY, s]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate {
    pub q: Vec<f64>,
    pub samples: usize,
    /// Per-edge 99% half-width `sqrt(2 ln n / t)`.
    pub half_width: f64,
    /// Estimated expected size of the policy's matching.
    pub mean_size: f64,
}

pub fn half_width(n: usize, t: usize) -> f64 {
    (2.0 * (n.max(2) as f64).ln() / t as f64).sqrt()
}

/// Monte-Carlo edge marginals of `policy` on coupled realizations of the
/// half-stochastic graph. Sample `s` draws `X_e` from `(seed, s)` only.
pub fn estimate_marginals(
    graph: &Graph,
    partition: &EdgePartition,
    policy: &MatchingPolicy,
    p: f64,
    t: usize,
    seed: u64,
) -> Result<MarginalEstimate> {
    if t == 0 {
        return Err(parameter("sample count must be positive"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(parameter(format!("p must lie in [0,1], got {p}")));
    }
    if partition.len() != graph.m() {
        return Err(structural("partition does not match the graph"));
    }
    policy.validate(graph, partition)?;
    let prepared = PreparedPolicy::new(graph, policy);
    let counts = (0..t as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; graph.m()],
            |mut acc, s| {
                let x = coupled_draws(graph, p, seed, s);
                for &e in prepared.run(&x, selector(seed, s)).edges() {
                    acc[e] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; graph.m()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let q: Vec<f64> = counts.iter().map(|&c| c as f64 / t as f64).collect();
    let total: u64 = counts.iter().sum();
    Ok(MarginalEstimate { q, samples: t, half_width: half_width(graph.n(), t), mean_size: total as f64 / t as f64 })
}

/// `Σ_e (q̂_e − ε q̂_e²)`.
pub fn phi_value(marginals: &MarginalEstimate, epsilon: f64) -> f64 {
    marginals.q.iter().map(|&q| q - epsilon * q * q).sum()
}

/// `S` edges whose estimated marginal exceeds `ε² p`.
pub fn heavy_edges(marginals: &MarginalEstimate, partition: &EdgePartition, epsilon: f64, p: f64) -> Vec<usize> {
    let threshold = epsilon * epsilon * p;
    partition.s_edges().into_iter().filter(|&e| marginals.q[e] > threshold).collect()
}

/// Expected policy matching size and expected exact `μ(H)` over the same
/// coupled samples of `H = Q_p ∪ S`.
pub fn policy_size_vs_optimum(
    graph: &Graph,
    partition: &EdgePartition,
    policy: &MatchingPolicy,
    p: f64,
    t: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(parameter("sample count must be positive"));
    }
    policy.validate(graph, partition)?;
    let prepared = PreparedPolicy::new(graph, policy);
    let sides = bipartition(graph);
    let sums = (0..t as u64)
        .into_par_iter()
        .map(|s| -> Result<(u64, u64)> {
            let x = coupled_draws(graph, p, seed, s);
            let got = prepared.run(&x, selector(seed, s)).size() as u64;
            let present: Vec<bool> = (0..graph.m()).map(|e| !partition.in_q(e) || x[e]).collect();
            let best = match &sides {
                Some(sides) => max_matching_masked(graph, sides, &present).size(),
                None => max_matching_size_small(graph, |e| present[e])?,
            } as u64;
            Ok((got, best))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    Ok((sums.0 as f64 / t as f64, sums.1 as f64 / t as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub epsilon: f64,
    pub p: f64,
    pub max_rounds: usize,
    pub samples: usize,
    /// Improvement margin; `None` uses `(εp)¹⁰ · μ̂(G)`.
    pub margin: Option<f64>,
    pub seed: u64,
    /// Test mixtures against every earlier round instead of only the previous one.
    pub full_pairwise: bool,
    /// Upper bound on policy swaps before swap testing is disabled.
    pub max_swaps: usize,
}

impl PartitionConfig {
    pub const DEFAULT_MAX_ROUNDS: usize = 50;

    pub fn new(graph: &Graph, epsilon: f64, p: f64, seed: u64) -> Self {
        PartitionConfig {
            epsilon,
            p,
            max_rounds: Self::DEFAULT_MAX_ROUNDS,
            samples: default_samples(graph.n(), epsilon, p),
            margin: None,
            seed,
            full_pairwise: false,
            max_swaps: 2 * Self::DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(parameter(format!("epsilon must lie in (0,1], got {}", self.epsilon)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(parameter(format!("p must lie in (0,1], got {}", self.p)));
        }
        if self.max_rounds == 0 {
            return Err(parameter("max_rounds must be at least 1"));
        }
        if self.samples < 100 {
            return Err(parameter(format!("samples must be at least 100, got {}", self.samples)));
        }
        if let Some(m) = self.margin {
            if !(m >= 0.0) {
                return Err(parameter(format!("margin must be non-negative, got {m}")));
            }
        }
        Ok(())
    }
}

/// `max(10⁴, ceil(8 ln n / (ε² p)²))`.
pub fn default_samples(n: usize, epsilon: f64, p: f64) -> usize {
    let x = epsilon * epsilon * p;
    let t = (8.0 * (n.max(2) as f64).ln() / (x * x)).ceil();
    if t.is_finite() {
        (t as usize).max(10_000)
    } else {
        10_000
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Case1,
    RoundCap,
    DegreeCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionOutcome {
    pub partition: EdgePartition,
    pub policy: MatchingPolicy,
    pub phi_trace: Vec<f64>,
    pub termination: Termination,
    /// Number of rounds whose heavy edges were moved into `Q`.
    pub rounds_used: usize,
    pub swaps: usize,
    pub mu_hat: f64,
    pub samples: usize,
    pub half_width: f64,
    /// Largest estimated marginal of an `S` edge under the returned policy.
    pub max_s_marginal: f64,
}

impl PartitionOutcome {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| structural(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| structural(e.to_string()))
    }

    /// `rounds_used · ceil(1/(ε²p))`.
    pub fn degree_bound(&self, epsilon: f64, p: f64) -> usize {
        self.rounds_used * per_round_degree(epsilon, p)
    }
}

fn per_round_degree(epsilon: f64, p: f64) -> usize {
    (1.0 / (epsilon * epsilon * p)).ceil() as usize
}

/// `μ(G)` for bipartite graphs, greedy maximal matching size otherwise.
pub fn mu_hat(graph: &Graph) -> usize {
    match bipartition(graph) {
        Some(sides) => max_matching_masked(graph, &sides, &vec![true; graph.m()]).size(),
        None => greedy_masked(graph, 0..graph.m()).size(),
    }
}

struct Round {
    partition: EdgePartition,
    policy: MatchingPolicy,
    marginals: MarginalEstimate,
    phi: f64,
}

pub fn build_partition(graph: &Graph, cfg: &PartitionConfig) -> Result<PartitionOutcome> {
    cfg.validate()?;
    let (eps, p) = (cfg.epsilon, cfg.p);
    let matcher = if bipartition(graph).is_some() { Matcher::Maximum } else { Matcher::Greedy };
    let mu = mu_hat(graph) as f64;
    let margin = cfg.margin.unwrap_or_else(|| (eps * p).powi(10) * mu);
    let degree_limit = per_round_degree(eps, p);
    let estimate = |partition: &EdgePartition, policy: &MatchingPolicy| -> Result<(MarginalEstimate, f64)> {
        let est = estimate_marginals(graph, partition, policy, p, cfg.samples, cfg.seed)?;
        let phi = phi_value(&est, eps);
        Ok((est, phi))
    };
    let fresh_policy = |partition: &EdgePartition, counter: usize| {
        MatchingPolicy::single(matcher, partition, derive_path(cfg.seed, &[tag::POLICY, counter as u64]) | 1)
    };

    let mut rounds: Vec<Round> = Vec::new();
    let mut swaps = 0usize;
    let mut policies_made = 0usize;
    let mut partition = EdgePartition::all_certain(graph.m());
    let mut policy = fresh_policy(&partition, policies_made);
    policies_made += 1;
    let (mut marginals, mut phi) = estimate(&partition, &policy)?;

    let termination = loop {
        // Swap test against earlier rounds.
        if swaps < cfg.max_swaps && !rounds.is_empty() {
            let first = if cfg.full_pairwise { 0 } else { rounds.len() - 1 };
            let mut adopted = None;
            for j in first..rounds.len() {
                let incumbent = &rounds[j];
                if phi > incumbent.phi + margin {
                    adopted = Some((j, policy.clone(), marginals.clone(), phi));
                    break;
                }
                let mixed = MatchingPolicy::mix(&incumbent.policy, &policy)?;
                let (est, mixed_phi) = estimate(&incumbent.partition, &mixed)?;
                if mixed_phi > incumbent.phi + margin {
                    adopted = Some((j, mixed, est, mixed_phi));
                    break;
                }
            }
            if let Some((j, new_policy, new_marginals, new_phi)) = adopted {
                swaps += 1;
                rounds.truncate(j + 1);
                let r = rounds.pop().unwrap();
                partition = r.partition;
                policy = new_policy;
                marginals = new_marginals;
                phi = new_phi;
            }
        }

        let heavy = heavy_edges(&marginals, &partition, eps, p);
        let heavy_mass: f64 = heavy.iter().map(|&e| marginals.q[e]).sum();
        if heavy_mass < eps * p * mu || heavy.is_empty() {
            policy = policy.excluding(&heavy);
            for &e in &heavy {
                marginals.q[e] = 0.0;
            }
            rounds.push(Round {
                partition: partition.clone(),
                policy: policy.clone(),
                marginals: marginals.clone(),
                phi,
            });
            break Termination::Case1;
        }
        rounds.push(Round { partition: partition.clone(), policy: policy.clone(), marginals: marginals.clone(), phi });
        if rounds.len() >= cfg.max_rounds {
            break Termination::RoundCap;
        }
        let mut next = partition.clone();
        next.move_to_q(&heavy);
        if next.q_max_degree(graph) > rounds.len() * degree_limit {
            break Termination::DegreeCap;
        }
        partition = next;
        policy = fresh_policy(&partition, policies_made);
        policies_made += 1;
        (marginals, phi) = estimate(&partition, &policy)?;
    };

    let last = rounds.last().expect("at least one round");
    let max_s_marginal = last.partition.s_edges().into_iter().map(|e| last.marginals.q[e]).fold(0.0, f64::max);
    Ok(PartitionOutcome {
        partition: last.partition.clone(),
        policy: last.policy.clone(),
        phi_trace: rounds.iter().map(|r| r.phi).collect(),
        termination,
        rounds_used: rounds.len() - 1,
        swaps,
        mu_hat: mu,
        samples: cfg.samples,
        half_width: last.marginals.half_width,
        max_s_marginal,
    })
}
