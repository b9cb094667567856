//! Monte-Carlo evaluation of strategies against exact per-trial optima, and
//! exact expectations by enumeration for tiny graphs.
//!
//! Trial `i` samples its realization from `derive(seed, i)` alone, so every
//! strategy evaluated with the same seed sees the same realizations. All
//! per-trial quantities are integers and are summed exactly, which makes the
//! report independent of thread count and schedule.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{structural, Error, Result};
use crate::graph::{bipartition, sample_realization, Bipartition, Graph, Realization};
use crate::matching::{bipartite_mvc_masked, max_matching_masked, max_matching_size_small, mvc_by_components};
use crate::rng::{derive_path, tag};
use crate::strategies::{plan, respond, AnswerKind, QueryPlan, StrategyAnswer, StrategyId, StrategyParams};

pub const EXACT_ENUMERATION_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedStats {
    pub e_nu: f64,
    pub e_mu: f64,
}

/// Exact `E[ν(G_p)]` and `E[μ(G_p)]` over all `2^m` realizations.
pub fn exact_expected_stats(graph: &Graph, p: f64) -> Result<ExpectedStats> {
    crate::graph::check_probability("p", p)?;
    let m = graph.m();
    if m > EXACT_ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            what: "edges for exact enumeration".into(),
            size: m,
            cap: EXACT_ENUMERATION_LIMIT,
        });
    }
    let weight: Vec<f64> = (0..=m).map(|k| p.powi(k as i32) * (1.0 - p).powi((m - k) as i32)).collect();
    let total = 1u64 << m;
    let chunks = 64u64.min(total);
    let per_chunk = total.div_ceil(chunks);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let (mut nu, mut mu) = (0.0, 0.0);
            for r in c * per_chunk..((c + 1) * per_chunk).min(total) {
                let keep = |e: usize| r >> e & 1 == 1;
                let w = weight[r.count_ones() as usize];
                nu += w * mvc_by_components(graph, keep, 64)?.size() as f64;
                mu += w * max_matching_size_small(graph, keep)? as f64;
            }
            Ok((nu, mu))
        })
        .collect::<Result<_>>()?;
    let (e_nu, e_mu) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(ExpectedStats { e_nu, e_mu })
}

/// Realized edges left uncovered by a cover, or matching edges that are not
/// realized or share an endpoint.
pub fn validity_check(graph: &Graph, answer: &StrategyAnswer, realization: &Realization) -> usize {
    match answer {
        StrategyAnswer::Cover(c) => c.uncovered(graph, |e| realization.is_realized(e)),
        StrategyAnswer::Matching(m) => {
            let mut used = vec![false; graph.n()];
            let mut bad = 0;
            for &e in m.edges() {
                let (u, v) = graph.edge(e);
                if !realization.is_realized(e) || used[u] || used[v] {
                    bad += 1;
                }
                used[u] = true;
                used[v] = true;
            }
            bad
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    pub answer: usize,
    pub optimum: Option<usize>,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub instance: String,
    pub strategy: StrategyId,
    pub p: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub mean_answer: f64,
    pub mean_opt: Option<f64>,
    pub ratio: Option<f64>,
    pub ratio_ci95: Option<f64>,
    pub max_pv_queries: usize,
    pub total_queries: usize,
    pub validity_failures: usize,
    pub wall_ms: u128,
}

pub const CSV_HEADER: &str = "instance,strategy,p,epsilon,trials,seed,mean_answer,mean_opt,ratio,ratio_ci95,max_pv_queries,total_queries,validity_failures,wall_ms";

fn opt6(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl EvalReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{},{},{:.6},{},{},{},{},{},{},{}",
            self.instance,
            self.strategy,
            self.p,
            self.epsilon,
            self.trials,
            self.seed,
            self.mean_answer,
            opt6(self.mean_opt),
            opt6(self.ratio),
            opt6(self.ratio_ci95),
            self.max_pv_queries,
            self.total_queries,
            self.validity_failures,
            self.wall_ms
        )
    }
}

pub fn to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Realization of trial `i` under `seed`.
pub fn trial_realization(graph: &Graph, p: f64, seed: u64, i: usize) -> Realization {
    sample_realization(graph, p, derive_path(seed, &[tag::TRIAL, i as u64]))
}

struct Optimum<'a> {
    graph: &'a Graph,
    sides: Option<Bipartition>,
    kind: AnswerKind,
    exact_cap: usize,
}

impl Optimum<'_> {
    /// `ν(G_p)` for covers, `μ(G_p)` for matchings; `None` when out of reach.
    fn of(&self, r: &Realization) -> Result<Option<usize>> {
        let mask = r.mask();
        match (&self.sides, self.kind) {
            (Some(sides), _) => {
                let matching = max_matching_masked(self.graph, sides, mask);
                if self.kind == AnswerKind::Cover {
                    let cover = bipartite_mvc_masked(self.graph, sides, mask);
                    if cover.size() != matching.size() {
                        return Err(structural("König equality violated"));
                    }
                }
                Ok(Some(matching.size()))
            }
            (None, AnswerKind::Cover) => match mvc_by_components(self.graph, |e| mask[e], self.exact_cap) {
                Ok(c) => Ok(Some(c.size())),
                Err(Error::Capacity { .. }) => Ok(None),
                Err(e) => Err(e),
            },
            (None, AnswerKind::Matching) => match max_matching_size_small(self.graph, |e| mask[e]) {
                Ok(s) => Ok(Some(s)),
                Err(Error::Capacity { .. }) => Ok(None),
                Err(e) => Err(e),
            },
        }
    }
}

/// Plan once, then run `trials` realizations.
pub fn evaluate_strategy(
    instance: &str,
    id: StrategyId,
    graph: &Graph,
    params: &StrategyParams,
    trials: usize,
    seed: u64,
) -> Result<EvalReport> {
    let start = Instant::now();
    let plan = plan(id, graph, params)?;
    let (mut report, _) = evaluate_plan(instance, graph, &plan, params, trials, seed)?;
    report.wall_ms = start.elapsed().as_millis();
    Ok(report)
}

/// Evaluate an existing plan; also returns the per-trial records.
pub fn evaluate_plan(
    instance: &str,
    graph: &Graph,
    plan: &QueryPlan,
    params: &StrategyParams,
    trials: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<TrialRecord>)> {
    if trials == 0 {
        return Err(crate::error::parameter("trials must be at least 1"));
    }
    let start = Instant::now();
    let optimum =
        Optimum { graph, sides: bipartition(graph), kind: plan.strategy.kind(), exact_cap: params.overrides.exact_cap };
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<TrialRecord> {
            let r = trial_realization(graph, params.p, seed, i);
            let answer = respond(graph, plan, &r.restrict(&plan.queried))?;
            Ok(TrialRecord {
                answer: answer.size(),
                optimum: optimum.of(&r)?,
                violations: validity_check(graph, &answer, &r),
            })
        })
        .collect::<Result<_>>()?;
    let mut report = summarize(instance, plan, params, seed, &records, graph);
    report.wall_ms = start.elapsed().as_millis();
    Ok((report, records))
}

fn summarize(
    instance: &str,
    plan: &QueryPlan,
    params: &StrategyParams,
    seed: u64,
    records: &[TrialRecord],
    graph: &Graph,
) -> EvalReport {
    let n = records.len() as f64;
    let sum_a: u64 = records.iter().map(|r| r.answer as u64).sum();
    let mean_answer = sum_a as f64 / n;
    let all_opt: Option<Vec<usize>> = records.iter().map(|r| r.optimum).collect();
    let (mean_opt, ratio, ratio_ci95) = match all_opt {
        None => (None, None, None),
        Some(opts) => {
            let sum_o: u64 = opts.iter().map(|&o| o as u64).sum();
            let mean_o = sum_o as f64 / n;
            if sum_o == 0 {
                (Some(mean_o), None, None)
            } else {
                let ratio = sum_a as f64 / sum_o as f64;
                let (mut saa, mut sao, mut soo) = (0u128, 0u128, 0u128);
                for (r, &o) in records.iter().zip(&opts) {
                    let (a, o) = (r.answer as u128, o as u128);
                    saa += a * a;
                    sao += a * o;
                    soo += o * o;
                }
                // Delta method: Var(a − r·o) / (n · mean_o²).
                let ss = saa as f64 - 2.0 * ratio * sao as f64 + ratio * ratio * soo as f64;
                let var = (ss / (n - 1.0).max(1.0)).max(0.0);
                (Some(mean_o), Some(ratio), Some(1.96 * (var / n).sqrt() / mean_o))
            }
        }
    };
    EvalReport {
        instance: instance.to_string(),
        strategy: plan.strategy,
        p: params.p,
        epsilon: params.epsilon,
        trials: records.len(),
        seed,
        mean_answer,
        mean_opt,
        ratio,
        ratio_ci95,
        max_pv_queries: plan.max_per_vertex(graph),
        total_queries: plan.queried.len(),
        validity_failures: records.iter().map(|r| r.violations).sum(),
        wall_ms: 0,
    }
}

/// Evaluate several strategies on common realizations.
pub fn compare(
    instance: &str,
    ids: &[StrategyId],
    graph: &Graph,
    params: &StrategyParams,
    trials: usize,
    seed: u64,
) -> Result<Vec<(EvalReport, Vec<TrialRecord>)>> {
    ids.iter()
        .map(|&id| {
            let start = Instant::now();
            let plan = plan(id, graph, params)?;
            let (mut report, records) = evaluate_plan(instance, graph, &plan, params, trials, seed)?;
            report.wall_ms = start.elapsed().as_millis();
            Ok((report, records))
        })
        .collect()
}

/// Run `f` on a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| structural(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
