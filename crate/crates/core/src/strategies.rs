//! Non-adaptive strategies behind one plan/respond interface.
//!
//! `plan` sees only the base graph and parameters. `respond` sees the plan and
//! the realization restricted to the planned query set.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;

use crate::error::{parameter, structural, Error, Result};
use crate::filling::{general_vc_cover, general_vc_plan_at, truncation_time, GeneralVcPlan, DEFAULT_T_CONSTANT};
use crate::graph::{bipartition, check_probability, edge_realized, Bipartition, Graph, QueryAnswers};
use crate::matching::{
    bipartite_mvc_masked, max_matching_masked, mvc_by_components, Matching, VertexCover, DEFAULT_EXACT_CAP,
};
use crate::partition::{build_partition, PartitionConfig, PartitionOutcome};
use crate::rng::{chacha, derive_path, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategyId {
    GeneralVc,
    BipartiteVc,
    McMatching,
    OnePlusEpsVc,
    RandomQueryBaseline,
    QueryNothing,
    QueryEverything,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnswerKind {
    Cover,
    Matching,
}

impl StrategyId {
    pub const ALL: [StrategyId; 7] = [
        StrategyId::GeneralVc,
        StrategyId::BipartiteVc,
        StrategyId::McMatching,
        StrategyId::OnePlusEpsVc,
        StrategyId::RandomQueryBaseline,
        StrategyId::QueryNothing,
        StrategyId::QueryEverything,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::GeneralVc => "general_vc",
            StrategyId::BipartiteVc => "bipartite_vc",
            StrategyId::McMatching => "mc_matching",
            StrategyId::OnePlusEpsVc => "one_plus_eps_vc",
            StrategyId::RandomQueryBaseline => "random_query_baseline",
            StrategyId::QueryNothing => "query_nothing",
            StrategyId::QueryEverything => "query_everything",
        }
    }

    pub fn kind(self) -> AnswerKind {
        match self {
            StrategyId::McMatching => AnswerKind::Matching,
            _ => AnswerKind::Cover,
        }
    }

    pub fn bipartite_only(self) -> bool {
        matches!(self, StrategyId::BipartiteVc | StrategyId::McMatching | StrategyId::OnePlusEpsVc)
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| parameter(format!("unknown strategy '{s}'")))
    }
}

/// Optional knobs; `None` means the documented default.
#[derive(Clone, Debug, PartialEq)]
pub struct Overrides {
    /// `c` in the filling truncation time `t = c ε³ p` (default 1/64).
    pub t_constant: Option<f64>,
    /// `c` in `R = ceil(c ln(1/p) / p)` (default 4).
    pub r_constant: Option<f64>,
    /// Multiplier on `R` for the inner matcher of `one_plus_eps_vc`.
    pub inner_r_factor: f64,
    /// Incident edges sampled per vertex by the random baseline.
    pub random_s: usize,
    pub partition_samples: Option<usize>,
    pub partition_rounds: Option<usize>,
    /// Largest connected component solved exactly on general graphs.
    pub exact_cap: usize,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            t_constant: None,
            r_constant: None,
            inner_r_factor: 4.0,
            random_s: 3,
            partition_samples: None,
            partition_rounds: None,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyParams {
    pub epsilon: f64,
    pub p: f64,
    pub seed: u64,
    pub overrides: Overrides,
}

impl StrategyParams {
    pub fn new(epsilon: f64, p: f64, seed: u64) -> Self {
        StrategyParams { epsilon, p, seed, overrides: Overrides::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(parameter(format!("epsilon must lie in (0,1], got {}", self.epsilon)));
        }
        check_probability("p", self.p)?;
        if self.p == 0.0 {
            return Err(parameter("p must be positive"));
        }
        let o = &self.overrides;
        for (name, v) in [("t_constant", o.t_constant), ("r_constant", o.r_constant)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(parameter(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if !(o.inner_r_factor >= 1.0 && o.inner_r_factor.is_finite()) {
            return Err(parameter(format!("inner_r_factor must be at least 1, got {}", o.inner_r_factor)));
        }
        if o.random_s == 0 {
            return Err(parameter("random_s must be at least 1"));
        }
        Ok(())
    }
}

/// `max(1, ceil(c ln(1/p) / p))`.
pub fn mc_rounds(p: f64, c: f64) -> usize {
    ((c * (1.0 / p).ln() / p).ceil() as usize).max(1)
}

/// Inner-matcher accuracy target `ε p^(2/ε + 2) / 4`.
pub fn one_plus_eps_delta(epsilon: f64, p: f64) -> f64 {
    epsilon * p.powf(2.0 / epsilon + 2.0) / 4.0
}

/// Strategy-specific state computed at plan time from the base graph only.
#[derive(Clone, Debug)]
pub enum Payload {
    GeneralVc(GeneralVcPlan),
    BipartiteVc { sides: Bipartition, outcome: Box<PartitionOutcome> },
    McMatching { sides: Bipartition, rounds: usize },
    OnePlusEpsVc { sides: Bipartition, rounds: usize, delta: f64 },
    RandomQueryBaseline { sides: Option<Bipartition>, s: usize, exact_cap: usize },
    QueryNothing { cover: VertexCover },
    QueryEverything { sides: Option<Bipartition>, exact_cap: usize },
}

#[derive(Clone, Debug)]
pub struct QueryPlan {
    pub strategy: StrategyId,
    pub fingerprint: u64,
    /// Queried edges in increasing index order.
    pub queried: Vec<usize>,
    pub payload: Payload,
}

impl QueryPlan {
    /// Largest number of queried edges at a single vertex.
    pub fn max_per_vertex(&self, graph: &Graph) -> usize {
        let mut deg = vec![0usize; graph.n()];
        for &e in &self.queried {
            let (u, v) = graph.edge(e);
            deg[u] += 1;
            deg[v] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    fn queried_mask(&self, m: usize) -> Vec<bool> {
        let mut mask = vec![false; m];
        for &e in &self.queried {
            mask[e] = true;
        }
        mask
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StrategyAnswer {
    Cover(VertexCover),
    Matching(Matching),
}

impl StrategyAnswer {
    pub fn size(&self) -> usize {
        match self {
            StrategyAnswer::Cover(c) => c.size(),
            StrategyAnswer::Matching(m) => m.size(),
        }
    }
}

fn require_bipartite(id: StrategyId, graph: &Graph) -> Result<Bipartition> {
    bipartition(graph).ok_or_else(|| Error::NotBipartite(id.to_string()))
}

pub fn plan(id: StrategyId, graph: &Graph, params: &StrategyParams) -> Result<QueryPlan> {
    params.validate()?;
    let (eps, p, seed) = (params.epsilon, params.p, params.seed);
    let o = &params.overrides;
    let (queried, payload) = match id {
        StrategyId::GeneralVc => {
            let t = truncation_time(eps, p, o.t_constant.unwrap_or(DEFAULT_T_CONSTANT));
            let plan = general_vc_plan_at(graph, t)?;
            (plan.queried.clone(), Payload::GeneralVc(plan))
        }
        StrategyId::BipartiteVc => {
            let sides = require_bipartite(id, graph)?;
            let mut cfg = PartitionConfig::new(graph, eps, p, derive_path(seed, &[tag::PLAN]));
            if let Some(t) = o.partition_samples {
                cfg.samples = t;
            }
            if let Some(k) = o.partition_rounds {
                cfg.max_rounds = k;
                cfg.max_swaps = 2 * k;
            }
            let outcome = build_partition(graph, &cfg)?;
            (outcome.partition.q_edges(), Payload::BipartiteVc { sides, outcome: Box::new(outcome) })
        }
        StrategyId::McMatching => {
            let sides = require_bipartite(id, graph)?;
            let rounds = mc_rounds(p, o.r_constant.unwrap_or(4.0));
            (union_of_matchings(graph, &sides, p, rounds, seed), Payload::McMatching { sides, rounds })
        }
        StrategyId::OnePlusEpsVc => {
            let sides = require_bipartite(id, graph)?;
            let base = mc_rounds(p, o.r_constant.unwrap_or(4.0));
            let rounds = ((base as f64) * o.inner_r_factor).ceil() as usize;
            let queried = union_of_matchings(graph, &sides, p, rounds, seed);
            (queried, Payload::OnePlusEpsVc { sides, rounds, delta: one_plus_eps_delta(eps, p) })
        }
        StrategyId::RandomQueryBaseline => {
            let queried = random_incident_edges(graph, o.random_s, seed);
            (queried, Payload::RandomQueryBaseline { sides: bipartition(graph), s: o.random_s, exact_cap: o.exact_cap })
        }
        StrategyId::QueryNothing => {
            let cover = match bipartition(graph) {
                Some(sides) => bipartite_mvc_masked(graph, &sides, &vec![true; graph.m()]),
                None => mvc_by_components(graph, |_| true, o.exact_cap)?,
            };
            (Vec::new(), Payload::QueryNothing { cover })
        }
        StrategyId::QueryEverything => {
            ((0..graph.m()).collect(), Payload::QueryEverything { sides: bipartition(graph), exact_cap: o.exact_cap })
        }
    };
    Ok(QueryPlan { strategy: id, fingerprint: graph.fingerprint(), queried, payload })
}

/// Union of deterministic maximum matchings of `rounds` seeded realizations.
fn union_of_matchings(graph: &Graph, sides: &Bipartition, p: f64, rounds: usize, seed: u64) -> Vec<usize> {
    let mut chosen = vec![false; graph.m()];
    for i in 0..rounds {
        let s = derive_path(seed, &[tag::PLAN, i as u64]);
        let mask: Vec<bool> = (0..graph.m()).map(|e| edge_realized(s, e, p)).collect();
        for &e in max_matching_masked(graph, sides, &mask).edges() {
            chosen[e] = true;
        }
    }
    (0..graph.m()).filter(|&e| chosen[e]).collect()
}

/// Each vertex picks `min(s, deg)` incident edges uniformly without replacement.
fn random_incident_edges(graph: &Graph, s: usize, seed: u64) -> Vec<usize> {
    let mut chosen = vec![false; graph.m()];
    for v in 0..graph.n() {
        let nbrs = graph.neighbors(v);
        let k = s.min(nbrs.len());
        let mut rng = chacha(derive_path(seed, &[tag::PLAN, v as u64]));
        for i in sample(&mut rng, nbrs.len(), k) {
            chosen[nbrs[i].1] = true;
        }
    }
    (0..graph.m()).filter(|&e| chosen[e]).collect()
}

/// Exact MVC of the edges in `keep`.
fn exact_cover(graph: &Graph, sides: Option<&Bipartition>, keep: &[bool], cap: usize) -> Result<VertexCover> {
    match sides {
        Some(sides) => Ok(bipartite_mvc_masked(graph, sides, keep)),
        None => mvc_by_components(graph, |e| keep[e], cap),
    }
}

pub fn respond(graph: &Graph, plan: &QueryPlan, answers: &QueryAnswers) -> Result<StrategyAnswer> {
    if plan.fingerprint != graph.fingerprint() || answers.fingerprint() != graph.fingerprint() {
        return Err(structural("plan or answers belong to a different graph"));
    }
    if answers.queried() != plan.queried.as_slice() {
        return Err(structural("answers do not match the planned query set"));
    }
    let m = graph.m();
    let mut realized_q = vec![false; m];
    for e in answers.realized_edges() {
        realized_q[e] = true;
    }
    // H = Q_p ∪ S
    let half_stochastic = || {
        let queried = plan.queried_mask(m);
        (0..m).map(|e| !queried[e] || realized_q[e]).collect::<Vec<bool>>()
    };
    Ok(match &plan.payload {
        Payload::GeneralVc(p) => StrategyAnswer::Cover(general_vc_cover(graph, p, answers)?),
        Payload::BipartiteVc { sides, .. } | Payload::OnePlusEpsVc { sides, .. } => {
            StrategyAnswer::Cover(bipartite_mvc_masked(graph, sides, &half_stochastic()))
        }
        Payload::McMatching { sides, .. } => StrategyAnswer::Matching(max_matching_masked(graph, sides, &realized_q)),
        Payload::RandomQueryBaseline { sides, exact_cap, .. } => {
            StrategyAnswer::Cover(exact_cover(graph, sides.as_ref(), &half_stochastic(), *exact_cap)?)
        }
        Payload::QueryNothing { cover } => StrategyAnswer::Cover(cover.clone()),
        Payload::QueryEverything { sides, exact_cap } => {
            StrategyAnswer::Cover(exact_cover(graph, sides.as_ref(), &realized_q, *exact_cap)?)
        }
    })
}
