//! Budgeted water-filling and the general-graph cover strategy built on it.
//!
//! All edges whose endpoints are both active grow at the same rate. A vertex
//! goes inactive when its incident sum reaches its budget. The process is
//! simulated event by event: between events each vertex sum is linear in time,
//! so the next saturation time per vertex is known in closed form and kept in
//! a lazy min-heap.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{parameter, structural, Result};
use crate::graph::{FractionalAssignment, Graph, QueryAnswers, FEAS_TOL};
use crate::matching::VertexCover;

/// Vertices whose saturation times differ by at most this are deactivated in
/// the same event.
const TIME_TOL: f64 = 1e-12;

/// Tolerance of the `x'_v + y_v = 1` membership test.
pub const COVER_TOL: f64 = 1e-9;

/// Default hidden constant in `t = c · ε³ · p`.
pub const DEFAULT_T_CONSTANT: f64 = 1.0 / 64.0;

#[derive(Clone, Debug)]
pub struct FillingResult {
    pub assignment: FractionalAssignment,
    /// Time at which each vertex stopped growing. Vertices that never reached
    /// their budget carry the final elapsed time.
    pub death_time: Vec<f64>,
    /// Whether the vertex went inactive by reaching its budget.
    pub saturated: Vec<bool>,
}

#[derive(PartialEq)]
struct Event {
    time: f64,
    vertex: usize,
    version: u32,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (time, vertex)
        other.time.total_cmp(&self.time).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Run the water-filling process with per-vertex budgets in `[0, 1]`.
pub fn filling(graph: &Graph, budgets: &[f64]) -> Result<FillingResult> {
    if budgets.len() != graph.n() {
        return Err(structural(format!("{} budgets for {} vertices", budgets.len(), graph.n())));
    }
    if let Some(b) = budgets.iter().find(|b| !(-FEAS_TOL..=1.0 + FEAS_TOL).contains(*b)) {
        return Err(parameter(format!("budget {b} outside [0,1]")));
    }
    Ok(run(graph, budgets))
}

fn run(graph: &Graph, budgets: &[f64]) -> FillingResult {
    let n = graph.n();
    let budget: Vec<f64> = budgets.iter().map(|&b| b.max(0.0)).collect();
    let mut alive = vec![true; n];
    let mut saturated = vec![false; n];
    let mut death = vec![f64::NAN; n];
    let mut base = vec![0.0f64; n];
    let mut t_last = vec![0.0f64; n];
    let mut active_deg = vec![0usize; n];
    let mut version = vec![0u32; n];

    for v in 0..n {
        if budget[v] <= 0.0 {
            alive[v] = false;
            saturated[v] = true;
            death[v] = 0.0;
        }
    }
    let mut heap = BinaryHeap::new();
    for v in 0..n {
        if alive[v] {
            active_deg[v] = graph.neighbors(v).iter().filter(|&&(w, _)| alive[w]).count();
            if active_deg[v] > 0 {
                heap.push(Event { time: budget[v] / active_deg[v] as f64, vertex: v, version: 0 });
            }
        }
    }

    let mut now = 0.0f64;
    let mut batch = Vec::new();
    while let Some(ev) = heap.pop() {
        if !alive[ev.vertex] || ev.version != version[ev.vertex] {
            continue;
        }
        now = ev.time;
        batch.clear();
        batch.push(ev.vertex);
        while let Some(next) = heap.peek() {
            if next.time > now + TIME_TOL {
                break;
            }
            let next = heap.pop().unwrap();
            if alive[next.vertex] && next.version == version[next.vertex] && !batch.contains(&next.vertex) {
                batch.push(next.vertex);
            }
        }
        for &v in &batch {
            alive[v] = false;
            saturated[v] = true;
            death[v] = now;
        }
        for &v in &batch {
            for &(w, _) in graph.neighbors(v) {
                if !alive[w] {
                    continue;
                }
                base[w] += active_deg[w] as f64 * (now - t_last[w]);
                t_last[w] = now;
                active_deg[w] -= 1;
                version[w] += 1;
                if active_deg[w] > 0 {
                    let t = now + (budget[w] - base[w]).max(0.0) / active_deg[w] as f64;
                    heap.push(Event { time: t, vertex: w, version: version[w] });
                }
            }
        }
    }
    for v in 0..n {
        if alive[v] {
            death[v] = now;
        }
    }
    let value = graph.edges().iter().map(|&(u, v)| death[u].min(death[v])).collect();
    FillingResult { assignment: FractionalAssignment { value }, death_time: death, saturated }
}

/// Snapshot of the process at time `t`: every edge capped at `t`.
pub fn truncate_at(result: &FillingResult, t: f64) -> FractionalAssignment {
    let t = t.max(0.0);
    FractionalAssignment { value: result.assignment.value.iter().map(|&x| x.min(t)).collect() }
}

/// Query plan for the general-graph cover strategy.
#[derive(Clone, Debug)]
pub struct GeneralVcPlan {
    pub t: f64,
    pub x_prime: FractionalAssignment,
    /// `x'_v`, the truncated vertex sums.
    pub x_prime_vertex: Vec<f64>,
    /// Vertices committed to the cover before any query (`x'_v = 1`).
    pub committed: Vec<bool>,
    /// Edges with no committed endpoint, in increasing index order.
    pub queried: Vec<usize>,
    /// `1 - x'_v`.
    pub residual_budget: Vec<f64>,
}

impl GeneralVcPlan {
    pub fn committed_vertices(&self) -> Vec<usize> {
        (0..self.committed.len()).filter(|&v| self.committed[v]).collect()
    }
}

/// The truncation time `c · ε³ · p`.
pub fn truncation_time(epsilon: f64, p: f64, t_constant: f64) -> f64 {
    t_constant * epsilon.powi(3) * p
}

/// Plan with the default truncation constant `1/64`.
pub fn general_vc_plan(graph: &Graph, epsilon: f64, p: f64) -> Result<GeneralVcPlan> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(parameter(format!("epsilon must lie in (0,1], got {epsilon}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(parameter(format!("p must lie in (0,1], got {p}")));
    }
    general_vc_plan_at(graph, truncation_time(epsilon, p, DEFAULT_T_CONSTANT))
}

/// Plan for an explicit truncation time `t > 0`.
pub fn general_vc_plan_at(graph: &Graph, t: f64) -> Result<GeneralVcPlan> {
    if !(t > 0.0) {
        return Err(parameter(format!("truncation time must be positive, got {t}")));
    }
    let full = run(graph, &vec![1.0; graph.n()]);
    let x_prime = truncate_at(&full, t);
    let x_prime_vertex = x_prime.vertex_sums(graph);
    let committed: Vec<bool> = x_prime_vertex.iter().map(|&x| x >= 1.0 - COVER_TOL).collect();
    let queried = (0..graph.m())
        .filter(|&e| {
            let (u, v) = graph.edge(e);
            !committed[u] && !committed[v]
        })
        .collect();
    let residual_budget =
        x_prime_vertex.iter().zip(&committed).map(|(&x, &c)| if c { 0.0 } else { (1.0 - x).max(0.0) }).collect();
    Ok(GeneralVcPlan { t, x_prime, x_prime_vertex, committed, queried, residual_budget })
}

/// Second filling pass on the realized queried edges with residual budgets;
/// returns `{v : x'_v + y_v = 1}`.
pub fn general_vc_cover(graph: &Graph, plan: &GeneralVcPlan, answers: &QueryAnswers) -> Result<VertexCover> {
    if answers.fingerprint() != graph.fingerprint() || answers.queried() != plan.queried.as_slice() {
        return Err(structural("answers do not match the planned query set"));
    }
    let mut keep = vec![false; graph.m()];
    for e in answers.realized_edges() {
        keep[e] = true;
    }
    let sub = graph.edge_subgraph(|e| keep[e]);
    let y = run(&sub.graph, &plan.residual_budget);
    let y_vertex = y.assignment.vertex_sums(&sub.graph);
    let members = (0..graph.n()).filter(|&v| plan.x_prime_vertex[v] + y_vertex[v] >= 1.0 - COVER_TOL).collect();
    Ok(VertexCover::new(members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::{sample_realization, Realization};
    use proptest::prelude::*;

    fn star(d: usize) -> Graph {
        Graph::new(d + 1, (1..=d).map(|i| (0, i)).collect()).unwrap()
    }

    fn matching_graph(k: usize) -> Graph {
        Graph::new(2 * k, (0..k).map(|i| (2 * i, 2 * i + 1)).collect()).unwrap()
    }

    #[test]
    fn triangle_splits_evenly() {
        let r = filling(&cycle(3), &[1.0; 3]).unwrap();
        for &x in &r.assignment.value {
            assert!((x - 0.5).abs() < 1e-12);
        }
        for &d in &r.death_time {
            assert!((d - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn smaller_budget_saturates_first() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let r = filling(&g, &[1.0, 0.3]).unwrap();
        assert!((r.assignment.value[0] - 0.3).abs() < 1e-12);
        assert!(r.saturated[1] && !r.saturated[0]);
    }

    #[test]
    fn star_center_saturates() {
        let r = filling(&star(3), &[1.0; 4]).unwrap();
        for &x in &r.assignment.value {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_budget_vertex_is_dead_at_start() {
        let g = path(2);
        let r = filling(&g, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.death_time[1], 0.0);
        assert_eq!(r.assignment.value, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_budgets() {
        assert!(filling(&path(1), &[1.0]).is_err());
        assert!(filling(&path(1), &[1.0, 1.5]).is_err());
    }

    #[test]
    fn truncation_examples() {
        let r = filling(&cycle(3), &[1.0; 3]).unwrap();
        assert_eq!(truncate_at(&r, 0.9).value, r.assignment.value);
        assert_eq!(truncate_at(&r, 0.0).value, vec![0.0; 3]);
        assert_eq!(truncate_at(&r, 0.2).value, vec![0.2; 3]);
    }

    #[test]
    fn plan_on_disjoint_matching_queries_everything() {
        let g = matching_graph(6);
        let plan = general_vc_plan(&g, 0.5, 0.5).unwrap();
        assert!(plan.committed.iter().all(|&c| !c));
        assert_eq!(plan.queried, (0..6).collect::<Vec<_>>());
        assert_eq!(g.max_degree_in(&mask(&g, &plan.queried)), 1);

        let all = Realization::full(&g).restrict(&plan.queried);
        let c = general_vc_cover(&g, &plan, &all).unwrap();
        assert_eq!(c.size(), g.n());
        let none = Realization::none(&g).restrict(&plan.queried);
        assert_eq!(general_vc_cover(&g, &plan, &none).unwrap().size(), 0);
    }

    #[test]
    fn plan_commits_high_degree_star_center() {
        // t = ε³p/64 = 1/512 at ε = p = 1; degree 600 puts the center's death at 1/600 < t.
        let g = star(600);
        let plan = general_vc_plan(&g, 1.0, 1.0).unwrap();
        assert!(plan.committed[0]);
        assert!(plan.queried.is_empty());
        let none = Realization::none(&g).restrict(&plan.queried);
        assert_eq!(general_vc_cover(&g, &plan, &none).unwrap().members(), &[0]);
    }

    #[test]
    fn plan_on_edgeless_graph() {
        let g = Graph::empty(5);
        let plan = general_vc_plan(&g, 0.5, 0.5).unwrap();
        assert!(plan.queried.is_empty());
        assert!(plan.committed.iter().all(|&c| !c));
    }

    #[test]
    fn single_realized_edge_picks_smaller_residual() {
        // x' = (0.5, 0.2) on the two endpoints via a hand-built plan.
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let mut plan = general_vc_plan_at(&g, 0.1).unwrap();
        plan.x_prime_vertex = vec![0.5, 0.2];
        plan.residual_budget = vec![0.5, 0.8];
        let ans = Realization::full(&g).restrict(&plan.queried);
        assert_eq!(general_vc_cover(&g, &plan, &ans).unwrap().members(), &[0]);
        plan.x_prime_vertex = vec![0.3, 0.3];
        plan.residual_budget = vec![0.7, 0.7];
        assert_eq!(general_vc_cover(&g, &plan, &ans).unwrap().members(), &[0, 1]);
    }

    #[test]
    fn cover_rejects_mismatched_answers() {
        let g = matching_graph(3);
        let plan = general_vc_plan(&g, 0.5, 0.5).unwrap();
        let wrong = Realization::full(&g).restrict(&[0]);
        assert!(general_vc_cover(&g, &plan, &wrong).is_err());
    }

    fn mask(g: &Graph, edges: &[usize]) -> Vec<bool> {
        let mut m = vec![false; g.m()];
        for &e in edges {
            m[e] = true;
        }
        m
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..25).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..80).prop_map(move |raw| {
                let mut seen = std::collections::HashSet::new();
                let edges: Vec<_> =
                    raw.into_iter().filter(|&(a, b)| a != b && seen.insert((a.min(b), a.max(b)))).collect();
                Graph::new(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn filling_invariants(g in arb_graph(), raw in proptest::collection::vec(0.0f64..=1.0, 25)) {
            let budgets: Vec<f64> = raw[..g.n()].iter().map(|&b| if b < 0.1 { 0.0 } else { b }).collect();
            let r = filling(&g, &budgets).unwrap();
            prop_assert!(r.assignment.is_feasible(&g, &budgets));
            let sums = r.assignment.vertex_sums(&g);
            for v in 0..g.n() {
                prop_assert!((0.0..=1.0).contains(&r.death_time[v]));
                if r.saturated[v] {
                    prop_assert!((sums[v] - budgets[v]).abs() <= 1e-9);
                }
            }
            for (e, &(u, v)) in g.edges().iter().enumerate() {
                prop_assert_eq!(r.assignment.value[e], r.death_time[u].min(r.death_time[v]));
                // no edge is left with two unsaturated endpoints
                prop_assert!(r.saturated[u] || r.saturated[v]);
            }
        }

        #[test]
        fn truncation_is_monotone(g in arb_graph(), t1 in 0.0f64..1.0, dt in 0.0f64..1.0) {
            let r = filling(&g, &vec![1.0; g.n()]).unwrap();
            let a = truncate_at(&r, t1);
            let b = truncate_at(&r, t1 + dt);
            prop_assert!(a.value.iter().zip(&b.value).all(|(x, y)| x <= y));
        }

        #[test]
        fn plan_degree_bound_and_cover_validity(g in arb_graph(), eps in 0.2f64..=1.0, p in 0.05f64..=1.0, seed in any::<u64>()) {
            let plan = general_vc_plan(&g, eps, p).unwrap();
            let bound = (1.0 / plan.t).ceil() as usize;
            prop_assert!(g.max_degree_in(&mask(&g, &plan.queried)) <= bound);
            for (e, &(u, v)) in g.edges().iter().enumerate() {
                if plan.queried.binary_search(&e).is_err() {
                    prop_assert!(plan.committed[u] || plan.committed[v]);
                }
            }
            let r = sample_realization(&g, p, seed);
            let c = general_vc_cover(&g, &plan, &r.restrict(&plan.queried)).unwrap();
            prop_assert_eq!(c.uncovered(&g, |e| r.is_realized(e)), 0);
            for v in plan.committed_vertices() {
                prop_assert!(c.members().binary_search(&v).is_ok());
            }
        }
    }
}
