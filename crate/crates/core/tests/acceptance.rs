//! End-to-end acceptance checks. Runs as a plain binary so every check
//! prints its own PASS/FAIL line; exits non-zero if any check fails.

use std::time::Instant;

use sc_core::evaluator::{evaluate_plan, to_csv, trial_realization, with_threads, TrialRecord};
use sc_core::instances::{
    corpus, gen_er, gen_er_bipartite, gen_layered_counterexample, gen_perfect_matching, generate,
};
use sc_core::matching::{bipartite_mvc_masked, exact_mvc_general, max_matching_masked};
use sc_core::partition::{estimate_marginals, policy_size_vs_optimum};
use sc_core::rng::{derive, tag};
use sc_core::strategies::mc_rounds;
use sc_core::vim::{independence_stats, BaseMatcher, VimModel};
use sc_core::{
    bipartition, build_partition, evaluate_strategy, exact_expected_stats, plan, EvalReport, Family, Graph,
    InstanceDescriptor, PartitionConfig, PartitionOutcome, StrategyId, StrategyParams,
};

const TRIALS: usize = 10_000;
const SEED: u64 = 1;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(checks: &mut Vec<Check>, name: &'static str, pass: bool, detail: String) {
    println!("{:<28} {}  {}", name, if pass { "PASS" } else { "FAIL" }, detail);
    checks.push(Check { name, pass, detail });
}

fn ratio(r: &EvalReport) -> f64 {
    r.ratio.unwrap_or(f64::NAN)
}

fn strip_wall(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

fn bipartite_corpus() -> Vec<InstanceDescriptor> {
    corpus().into_iter().filter(|d| bipartition(&d.graph).is_some()).collect()
}

fn eval(d: &InstanceDescriptor, id: StrategyId, params: &StrategyParams, trials: usize) -> EvalReport {
    evaluate_strategy(&d.name(), id, &d.graph, params, trials, SEED).expect("evaluation succeeds")
}

const VALIDITY_SET: [StrategyId; 5] = [
    StrategyId::GeneralVc,
    StrategyId::BipartiteVc,
    StrategyId::OnePlusEpsVc,
    StrategyId::RandomQueryBaseline,
    StrategyId::QueryNothing,
];

fn validity_rows(instances: &[InstanceDescriptor], params: &StrategyParams) -> Vec<EvalReport> {
    let mut rows = Vec::new();
    for d in instances {
        let bip = bipartition(&d.graph).is_some();
        for id in VALIDITY_SET {
            if id.bipartite_only() && !bip {
                continue;
            }
            rows.push(eval(d, id, params, TRIALS));
        }
    }
    rows
}

fn validity(checks: &mut Vec<Check>) -> Vec<EvalReport> {
    let start = Instant::now();
    let params = StrategyParams::new(0.5, 0.3, SEED);
    let rows = validity_rows(&corpus(), &params);
    let failures: usize = rows.iter().map(|r| r.validity_failures).sum();
    let secs = start.elapsed().as_secs_f64();
    for r in &rows {
        println!("    {:<28} {:<22} ratio {:.4} failures {}", r.instance, r.strategy, ratio(r), r.validity_failures);
    }
    report(
        checks,
        "validity",
        failures == 0 && secs < 600.0,
        format!("{} runs x {TRIALS} trials, failures {failures}, {secs:.1}s (limit 600s)", rows.len()),
    );
    rows
}

fn general_ratio_instances() -> Vec<InstanceDescriptor> {
    vec![gen_er_bipartite(30, 30, 0.2, SEED).unwrap(), gen_er(50, 0.1, SEED).unwrap()]
}

fn general_ratio_params() -> StrategyParams {
    let mut params = StrategyParams::new(0.5, 0.3, SEED);
    // per-component optimum; er(50, 0.1) has 50 vertices overall
    params.overrides.exact_cap = 64;
    params
}

fn general_ratio_rows() -> Vec<EvalReport> {
    let params = general_ratio_params();
    general_ratio_instances().iter().map(|d| eval(d, StrategyId::GeneralVc, &params, TRIALS)).collect()
}

fn general_ratio(checks: &mut Vec<Check>) -> Vec<EvalReport> {
    let rows = with_threads(1, general_ratio_rows).unwrap();
    let bound = (64.0 / (0.5f64.powi(3) * 0.3)).ceil() as usize;
    let pass = rows.iter().all(|r| ratio(r) <= 2.6 && r.max_pv_queries <= bound);
    let detail = rows
        .iter()
        .map(|r| format!("{} ratio {:.4} max_pv {}", r.instance, ratio(r), r.max_pv_queries))
        .collect::<Vec<_>>()
        .join("; ");
    report(checks, "general ratio", pass, format!("{detail} (ratio <= 2.6, max_pv <= {bound})"));
    rows
}

fn degree_bounds(checks: &mut Vec<Check>, partitions: &[(String, PartitionOutcome)], eps: f64, p: f64) {
    let mut failures = Vec::new();
    let params = StrategyParams::new(0.5, 0.3, SEED);
    for d in corpus() {
        let t = sc_core::filling::truncation_time(params.epsilon, params.p, sc_core::filling::DEFAULT_T_CONSTANT);
        let plan = plan(StrategyId::GeneralVc, &d.graph, &params).unwrap();
        let got = plan.max_per_vertex(&d.graph);
        if got > (1.0 / t).ceil() as usize {
            failures.push(format!("{} general_vc {got}", d.name()));
        }
    }
    for d in bipartite_corpus() {
        for p_mc in [0.1, 0.3] {
            let params = StrategyParams::new(0.5, p_mc, SEED);
            let plan = plan(StrategyId::McMatching, &d.graph, &params).unwrap();
            let got = plan.max_per_vertex(&d.graph);
            let r = mc_rounds(p_mc, 4.0);
            if got > r {
                failures.push(format!("{} mc_matching p={p_mc} {got} > {r}", d.name()));
            }
        }
    }
    for (name, outcome) in partitions {
        let g = &find(name).graph;
        let bound = outcome.rounds_used * (1.0 / (eps * eps * p)).ceil() as usize;
        let got = outcome.partition.q_max_degree(g);
        if got > bound {
            failures.push(format!("{name} partition {got} > {bound}"));
        }
    }
    report(
        checks,
        "degree bounds",
        failures.is_empty(),
        if failures.is_empty() { "all plans within bounds".into() } else { failures.join("; ") },
    );
}

fn find(name: &str) -> InstanceDescriptor {
    corpus().into_iter().find(|d| d.name() == name).expect("corpus instance")
}

fn partition_properties(checks: &mut Vec<Check>) -> Vec<(String, PartitionOutcome)> {
    let (eps, p, t) = (0.3, 0.5, 20_000);
    let start = Instant::now();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for d in bipartite_corpus().into_iter().filter(|d| d.graph.n() <= 40) {
        let g = &d.graph;
        let mut cfg = PartitionConfig::new(g, eps, p, SEED);
        cfg.samples = t;
        let out = build_partition(g, &cfg).unwrap();
        let fresh = derive(SEED, tag::FRESH);
        let est = estimate_marginals(g, &out.partition, &out.policy, p, t, fresh).unwrap();
        let limit = eps * eps * p + 3.0 * est.half_width;
        let worst_s = out.partition.s_edges().iter().map(|&e| est.q[e]).fold(0.0, f64::max);
        let rising = out.phi_trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let (got, best) = policy_size_vs_optimum(g, &out.partition, &out.policy, p, t, fresh).unwrap();
        let floor = (1.0 - 2.0 * eps - 0.05) * best;
        println!(
            "    {:<28} rounds {} |Q| {} max S marginal {:.4} (limit {:.4}) max rise {:.4} (limit {:.4}) E|M| {:.3} floor {:.3}",
            d.name(),
            out.rounds_used,
            out.partition.q_edges().len(),
            worst_s,
            limit,
            rising.max(0.0),
            2.0 * out.half_width,
            got,
            floor
        );
        if worst_s > limit {
            failures.push(format!("{} marginal {worst_s:.4}", d.name()));
        }
        if rising > 2.0 * out.half_width {
            failures.push(format!("{} phi rise {rising:.4}", d.name()));
        }
        if got < floor {
            failures.push(format!("{} policy size {got:.3} < {floor:.3}", d.name()));
        }
        outcomes.push((d.name(), out));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 300.0 {
        failures.push(format!("runtime {secs:.1}s"));
    }
    report(
        checks,
        "partition properties",
        failures.is_empty(),
        format!("{} graphs, {secs:.1}s (limit 300s){}", outcomes.len(), suffix(&failures)),
    );
    outcomes
}

fn suffix(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!(": {}", failures.join("; "))
    }
}

fn bipartite_ratio(checks: &mut Vec<Check>) {
    let mut params = StrategyParams::new(0.1, 0.5, SEED);
    params.overrides.partition_samples = Some(4000);
    let rows: Vec<EvalReport> =
        bipartite_corpus().iter().map(|d| eval(d, StrategyId::BipartiteVc, &params, TRIALS)).collect();
    let worst = rows.iter().map(ratio).fold(0.0, f64::max);
    for r in &rows {
        println!(
            "    {:<28} ratio {:.4} +- {:.4} |Q| {}",
            r.instance,
            ratio(r),
            r.ratio_ci95.unwrap_or(0.0),
            r.total_queries
        );
    }
    report(checks, "bipartite ratio (empirical)", worst <= 1.45, format!("max ratio {worst:.4} (<= 1.45)"));
    report(checks, "bipartite ratio hard bound", worst <= 2.0, format!("max ratio {worst:.4} (<= 2.0)"));
}

fn mc_matching_ratio(checks: &mut Vec<Check>) {
    let mut worst = f64::INFINITY;
    for p in [0.1, 0.3] {
        let params = StrategyParams::new(0.5, p, SEED);
        for d in bipartite_corpus() {
            let r = eval(&d, StrategyId::McMatching, &params, TRIALS);
            println!("    {:<28} p={p} ratio {:.4}", r.instance, ratio(&r));
            worst = worst.min(ratio(&r));
        }
    }
    report(checks, "mc matching ratio", worst >= 0.70, format!("min ratio {worst:.4} (>= 0.70)"));
}

fn distance_three(g: &Graph, a: usize, b: usize) -> bool {
    g.neighbors(a).iter().any(|&(x, _)| g.neighbors(b).iter().any(|&(y, _)| g.find_edge(x, y).is_some()))
}

fn vim_properties(checks: &mut Vec<Check>) {
    let trials = 100_000;
    let p = 0.5;
    let graphs = [
        generate(&Family::Layered { n: 8, core: 4 }, 0).unwrap(),
        generate(&Family::Sdn { d: 1, s: 1, n_core: 3 }, 0).unwrap(),
        generate(&Family::RegularBipartite { n: 12, d: 2 }, 0).unwrap(),
        gen_perfect_matching(10).unwrap(),
        gen_er_bipartite(6, 6, 0.4, 5).unwrap(),
    ];
    let cov_limit = 3.0 * (0.25 / trials as f64).sqrt();
    let mut failures = Vec::new();
    let mut far_pairs = 0;
    for d in &graphs {
        let g = &d.graph;
        let model = VimModel::new(g, BaseMatcher::Maximum, p, 2000, SEED).unwrap();
        let st = independence_stats(&model, trials, SEED).unwrap();
        if st.size_gap_mean < -3.0 * st.size_gap_se {
            failures.push(format!("{} size gap {:.4}", d.name(), st.size_gap_mean));
        }
        let sides = model.sides();
        for v in 0..g.n() {
            let se3 = 3.0 * st.dominance_se[v];
            let ok = if sides.is_a(v) {
                st.pr_in_b[v] <= st.pr_propose[v] && (st.pr_propose[v] - st.pr_in_a[v]).abs() <= se3 + 1e-12
            } else {
                st.pr_in_b[v] <= st.pr_in_a[v] + se3 + 1e-12
            };
            if !ok {
                failures.push(format!("{} vertex {v}", d.name()));
            }
        }
        let mut worst: f64 = 0.0;
        for pair in st.pairs.iter().filter(|c| !c.adjacent) {
            worst = worst.max(pair.covariance.abs());
            if distance_three(g, pair.a, pair.b) {
                far_pairs += 1;
            }
            if pair.covariance.abs() > cov_limit {
                failures.push(format!("{} pair ({},{}) cov {:.5}", d.name(), pair.a, pair.b, pair.covariance));
            }
        }
        println!(
            "    {:<28} m {} E|M_A| {:.4} E|M_B| {:.4} gap {:.4} +- {:.4} max |cov| {:.5}",
            d.name(),
            g.m(),
            st.mean_size_a,
            st.mean_size_b,
            st.size_gap_mean,
            st.size_gap_se,
            worst
        );
    }
    if far_pairs == 0 {
        failures.push("no distance-3 pairs exercised".into());
    }
    report(
        checks,
        "vim properties",
        failures.is_empty(),
        format!(
            "{} graphs x {trials} trials, {far_pairs} distance-3 pairs, cov limit {cov_limit:.5}{}",
            graphs.len(),
            suffix(&failures)
        ),
    );
}

fn separation_rows() -> Vec<EvalReport> {
    let layered = gen_layered_counterexample(400, 40, 0).unwrap();
    let pm = gen_perfect_matching(40).unwrap();
    let params = StrategyParams::new(0.5, 0.25, SEED);
    vec![
        eval(&layered, StrategyId::RandomQueryBaseline, &params, 2000),
        eval(&layered, StrategyId::GeneralVc, &params, 2000),
        eval(&pm, StrategyId::QueryNothing, &StrategyParams::new(0.5, 0.5, SEED), TRIALS),
    ]
}

fn separations(checks: &mut Vec<Check>) -> Vec<EvalReport> {
    let rows = with_threads(1, separation_rows).unwrap();
    let (base, gvc, nothing) = (ratio(&rows[0]), ratio(&rows[1]), ratio(&rows[2]));
    report(
        checks,
        "separation: random baseline",
        base >= 3.0 && gvc <= 2.6,
        format!("baseline ratio {base:.4} (>= 3), general_vc ratio {gvc:.4} (<= 2.6)"),
    );
    report(
        checks,
        "separation: query nothing",
        (1.9..=2.1).contains(&nothing),
        format!("ratio {nothing:.4} (in [1.9, 2.1])"),
    );
    rows
}

fn mean_se(values: &[usize]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<usize>() as f64 / n;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn brute_force_cover(g: &Graph) -> usize {
    (0u32..1 << g.n())
        .filter(|&s| g.edges().iter().all(|&(u, v)| s >> u & 1 == 1 || s >> v & 1 == 1))
        .map(u32::count_ones)
        .min()
        .unwrap() as usize
}

fn oracle_cross_checks(checks: &mut Vec<Check>) {
    let trials = 100_000;
    let p = 0.5;
    let mut failures = Vec::new();
    let mut checked = 0;
    for d in corpus().into_iter().filter(|d| d.graph.m() <= 12) {
        let g = &d.graph;
        let exact = exact_expected_stats(g, p).unwrap();
        let params = StrategyParams::new(0.5, p, SEED);
        let optima = |id: StrategyId| -> Vec<usize> {
            let plan = plan(id, g, &params).unwrap();
            let (_, records): (_, Vec<TrialRecord>) =
                evaluate_plan(&d.name(), g, &plan, &params, trials, SEED).unwrap();
            records.iter().map(|r| r.optimum.unwrap()).collect()
        };
        let (nu, nu_se) = mean_se(&optima(StrategyId::QueryNothing));
        let mu_id = if bipartition(g).is_some() { StrategyId::McMatching } else { StrategyId::QueryNothing };
        let matching_sizes: Vec<usize> = if mu_id == StrategyId::McMatching {
            optima(mu_id)
        } else {
            (0..trials)
                .map(|i| {
                    let r = trial_realization(g, p, SEED, i);
                    sc_core::matching::max_matching_size_small(g, |e| r.is_realized(e)).unwrap()
                })
                .collect()
        };
        let (mu, mu_se) = mean_se(&matching_sizes);
        println!(
            "    {:<28} E_nu {:.4} vs {:.4} +- {:.4}; E_mu {:.4} vs {:.4} +- {:.4}",
            d.name(),
            exact.e_nu,
            nu,
            nu_se,
            exact.e_mu,
            mu,
            mu_se
        );
        if (nu - exact.e_nu).abs() > 3.0 * nu_se || (mu - exact.e_mu).abs() > 3.0 * mu_se {
            failures.push(format!("{} oracle disagreement", d.name()));
        }
        checked += 1;
    }
    let mut konig = 0;
    for d in corpus().into_iter().chain(general_ratio_instances()).filter(|d| bipartition(&d.graph).is_some()) {
        let sides = bipartition(&d.graph).unwrap();
        for i in 0..1000 {
            let r = trial_realization(&d.graph, 0.3, SEED, i);
            let cover = bipartite_mvc_masked(&d.graph, &sides, r.mask());
            let matching = max_matching_masked(&d.graph, &sides, r.mask());
            if cover.size() != matching.size() || cover.uncovered(&d.graph, |e| r.is_realized(e)) != 0 {
                failures.push(format!("{} Konig trial {i}", d.name()));
            }
            konig += 1;
        }
    }
    let mut brute = 0;
    for n in 1..=14 {
        for (k, q) in [0.15, 0.3, 0.5, 0.8].into_iter().enumerate() {
            let g = gen_er(n, q, 100 + k as u64).unwrap().graph;
            if exact_mvc_general(&g, 40).unwrap().size() != brute_force_cover(&g) {
                failures.push(format!("exact mvc n={n} q={q}"));
            }
            brute += 1;
        }
    }
    report(
        checks,
        "oracle cross-checks",
        failures.is_empty() && checked > 0,
        format!("{checked} enumerated graphs, {konig} Konig checks, {brute} brute-force covers{}", suffix(&failures)),
    );
}

fn determinism(
    checks: &mut Vec<Check>,
    validity_rows_all: &[EvalReport],
    general: &[EvalReport],
    separation: &[EvalReport],
) {
    let subset: Vec<InstanceDescriptor> = corpus()
        .into_iter()
        .filter(|d| ["layered_n24_N8", "clique_n8"].contains(&d.name().as_str()) || d.name().starts_with("er_n20"))
        .collect();
    let names: Vec<String> = subset.iter().map(InstanceDescriptor::name).collect();
    let base: Vec<EvalReport> = validity_rows_all.iter().filter(|r| names.contains(&r.instance)).cloned().collect();
    let params = StrategyParams::new(0.5, 0.3, SEED);
    let mut mismatches = Vec::new();
    for threads in [1, 8] {
        let again = with_threads(threads, || validity_rows(&subset, &params)).unwrap();
        if strip_wall(&to_csv(&again)) != strip_wall(&to_csv(&base)) {
            mismatches.push(format!("validity subset at {threads} threads"));
        }
        if strip_wall(&to_csv(&with_threads(threads, general_ratio_rows).unwrap())) != strip_wall(&to_csv(general)) {
            mismatches.push(format!("general ratio at {threads} threads"));
        }
        if strip_wall(&to_csv(&with_threads(threads, separation_rows).unwrap())) != strip_wall(&to_csv(separation)) {
            mismatches.push(format!("separations at {threads} threads"));
        }
    }
    report(
        checks,
        "determinism",
        mismatches.is_empty() && !base.is_empty(),
        format!(
            "{} + {} + {} rows repeated at 1 and 8 threads{}",
            base.len(),
            general.len(),
            separation.len(),
            suffix(&mismatches)
        ),
    );
}

fn main() {
    let start = Instant::now();
    let mut checks = Vec::new();
    let validity_rows_all = validity(&mut checks);
    let general = general_ratio(&mut checks);
    let partitions = partition_properties(&mut checks);
    degree_bounds(&mut checks, &partitions, 0.3, 0.5);
    bipartite_ratio(&mut checks);
    mc_matching_ratio(&mut checks);
    vim_properties(&mut checks);
    let separation = separations(&mut checks);
    oracle_cross_checks(&mut checks);
    determinism(&mut checks, &validity_rows_all, &general, &separation);

    println!();
    println!("acceptance summary ({:.1}s)", start.elapsed().as_secs_f64());
    for c in &checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
    if !failed.is_empty() {
        for c in &failed {
            eprintln!("failed: {} ({})", c.name, c.detail);
        }
        std::process::exit(1);
    }
}
