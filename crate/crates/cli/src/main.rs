use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sc_core::evaluator::{compare, evaluate_strategy, exact_expected_stats, to_csv, with_threads};
use sc_core::instances::{generate, Family};
use sc_core::partition::{build_partition, PartitionConfig};
use sc_core::strategies::{Overrides, StrategyId, StrategyParams};
use sc_core::{read_graph_file, Graph};

mod config;

use config::ConfigFile;

#[derive(Parser)]
#[command(name = "sc", version, about = "Stochastic vertex cover and matching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance in the graph text format.
    Generate(GenerateArgs),
    /// Evaluate strategies and print one CSV row per strategy.
    Run(RunArgs),
    /// Like `run`, on common realizations; checks that per-trial optima agree.
    Compare(RunArgs),
    /// Exact E[nu(G_p)] and E[mu(G_p)] by enumeration (m <= 20).
    Oracle(OracleArgs),
    /// Build a queried/unqueried partition and write it as JSON.
    Partition(PartitionArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// sdn, layered, regular_bipartite, clique, perfect_matching, er_bipartite, er
    #[arg(long)]
    family: String,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    /// Core size N (sdn, layered).
    #[arg(long = "cap-n")]
    cap_n: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    na: Option<usize>,
    #[arg(long)]
    nb: Option<usize>,
    #[arg(long = "edge-prob")]
    edge_prob: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphSource {
    /// Graph file in the text format.
    #[arg(long, conflicts_with = "instance")]
    graph: Option<PathBuf>,
    /// Inline family spec, e.g. `sdn:d=3,s=5,N=6`.
    #[arg(long)]
    instance: Option<String>,
    /// Seed for inline random families.
    #[arg(long = "instance-seed")]
    instance_seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Strategy id, repeatable or comma separated.
    #[arg(long = "strategy", alias = "strategies", value_delimiter = ',')]
    strategies: Vec<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "t-constant")]
    t_constant: Option<f64>,
    #[arg(long = "r-constant")]
    r_constant: Option<f64>,
    #[arg(long = "inner-r-factor")]
    inner_r_factor: Option<f64>,
    #[arg(long = "random-s")]
    random_s: Option<usize>,
    #[arg(long = "partition-samples")]
    partition_samples: Option<usize>,
    #[arg(long = "partition-rounds")]
    partition_rounds: Option<usize>,
    #[arg(long = "exact-cap")]
    exact_cap: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long)]
    p: f64,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

type CliResult<T> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a, false),
        Command::Compare(a) => cmd_run(a, true),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Partition(a) => cmd_partition(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

/// `--seed`, then config, then `SC_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, cfg: &ConfigFile) -> CliResult<u64> {
    if let Some(s) = cfg.pick(flag, "seed")? {
        return Ok(s);
    }
    match std::env::var("SC_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| format!("SC_SEED must be an unsigned integer, got '{v}'")),
        Err(_) => Ok(0),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn need<T>(v: Option<T>, flag: &str, family: &str) -> CliResult<T> {
    v.ok_or_else(|| format!("family {family} needs --{flag}"))
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let f = a.family.as_str();
    let family = match f {
        "sdn" => Family::Sdn { d: need(a.d, "d", f)?, s: need(a.s, "s", f)?, n_core: need(a.cap_n, "cap-n", f)? },
        "layered" => Family::Layered { n: need(a.n, "n", f)?, core: need(a.cap_n, "cap-n", f)? },
        "regular_bipartite" => Family::RegularBipartite { n: need(a.n, "n", f)?, d: need(a.d, "d", f)? },
        "clique" => Family::Clique { n: need(a.n, "n", f)? },
        "perfect_matching" => Family::PerfectMatching { n: need(a.n, "n", f)? },
        "er_bipartite" => Family::ErBipartite {
            na: need(a.na, "na", f)?,
            nb: need(a.nb, "nb", f)?,
            q: need(a.edge_prob, "edge-prob", f)?,
        },
        "er" => Family::Er { n: need(a.n, "n", f)?, q: need(a.edge_prob, "edge-prob", f)? },
        other => return Err(format!("unknown family '{other}'")),
    };
    let seed = resolve_seed(a.seed, &ConfigFile::default())?;
    let inst = generate(&family, seed).map_err(|e| e.to_string())?;
    emit(a.out.as_deref(), &inst.to_text())
}

fn load_graph(src: &GraphSource) -> CliResult<(String, Graph)> {
    match (&src.graph, &src.instance) {
        (Some(path), _) => {
            let file = read_graph_file(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "graph".into());
            Ok((name, file.graph))
        }
        (None, Some(spec)) => {
            let family = Family::parse_inline(spec).map_err(|e| e.to_string())?;
            let inst = generate(&family, src.instance_seed.unwrap_or(0)).map_err(|e| e.to_string())?;
            Ok((inst.name(), inst.graph))
        }
        (None, None) => Err("one of --graph or --instance is required".into()),
    }
}

const CONFIG_KEYS: [&str; 14] = [
    "strategy",
    "p",
    "epsilon",
    "trials",
    "seed",
    "threads",
    "t_constant",
    "r_constant",
    "inner_r_factor",
    "random_s",
    "partition_samples",
    "partition_rounds",
    "exact_cap",
    "out",
];

fn cmd_run(a: RunArgs, common: bool) -> CliResult<()> {
    let cfg = match &a.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(k) = cfg.keys().find(|k| !CONFIG_KEYS.contains(k)) {
        return Err(format!("unknown config key '{k}'"));
    }
    let strategies: Vec<String> = if a.strategies.is_empty() {
        cfg.pick::<String>(None, "strategy")?
            .map(|s| s.split(',').map(|x| x.trim().to_string()).collect())
            .unwrap_or_default()
    } else {
        a.strategies.clone()
    };
    if strategies.is_empty() {
        return Err("at least one --strategy is required".into());
    }
    let ids =
        strategies.iter().map(|s| s.parse::<StrategyId>().map_err(|e| e.to_string())).collect::<CliResult<Vec<_>>>()?;
    let p = cfg.pick(a.p, "p")?.ok_or("--p is required")?;
    let epsilon = cfg.pick(a.epsilon, "epsilon")?.unwrap_or(0.5);
    let trials = cfg.pick(a.trials, "trials")?.unwrap_or(1000);
    if trials == 0 {
        return Err("--trials must be at least 1".into());
    }
    let seed = resolve_seed(a.seed, &cfg)?;
    let threads = cfg.pick(a.threads, "threads")?.unwrap_or(1);
    let defaults = Overrides::default();
    let overrides = Overrides {
        t_constant: cfg.pick(a.t_constant, "t_constant")?,
        r_constant: cfg.pick(a.r_constant, "r_constant")?,
        inner_r_factor: cfg.pick(a.inner_r_factor, "inner_r_factor")?.unwrap_or(defaults.inner_r_factor),
        random_s: cfg.pick(a.random_s, "random_s")?.unwrap_or(defaults.random_s),
        partition_samples: cfg.pick(a.partition_samples, "partition_samples")?,
        partition_rounds: cfg.pick(a.partition_rounds, "partition_rounds")?,
        exact_cap: cfg.pick(a.exact_cap, "exact_cap")?.unwrap_or(defaults.exact_cap),
    };
    let params = StrategyParams { epsilon, p, seed, overrides };
    params.validate().map_err(|e| e.to_string())?;
    let out: Option<PathBuf> = cfg.pick(a.out.clone(), "out")?;
    let (name, graph) = load_graph(&a.source)?;

    let reports = with_threads(threads, || -> CliResult<_> {
        if common {
            let results = compare(&name, &ids, &graph, &params, trials, seed).map_err(|e| e.to_string())?;
            let optima = |k: usize| results[k].1.iter().map(|t| t.optimum).collect::<Vec<_>>();
            for k in 1..results.len() {
                if ids[k].kind() == ids[0].kind() && optima(k) != optima(0) {
                    return Err("per-trial optima differ between strategies".into());
                }
            }
            Ok(results.into_iter().map(|(r, _)| r).collect::<Vec<_>>())
        } else {
            ids.iter()
                .map(|&id| evaluate_strategy(&name, id, &graph, &params, trials, seed).map_err(|e| e.to_string()))
                .collect()
        }
    })
    .map_err(|e| e.to_string())??;
    emit(out.as_deref(), &to_csv(&reports))
}

fn cmd_oracle(a: OracleArgs) -> CliResult<()> {
    let (_, graph) = load_graph(&a.source)?;
    let s = exact_expected_stats(&graph, a.p).map_err(|e| e.to_string())?;
    println!("E_nu={:?} E_mu={:?}", s.e_nu, s.e_mu);
    Ok(())
}

fn cmd_partition(a: PartitionArgs) -> CliResult<()> {
    let (_, graph) = load_graph(&a.source)?;
    let seed = resolve_seed(a.seed, &ConfigFile::default())?;
    let mut cfg = PartitionConfig::new(&graph, a.epsilon, a.p, seed);
    if let Some(t) = a.samples {
        cfg.samples = t;
    }
    if let Some(k) = a.rounds {
        cfg.max_rounds = k;
        cfg.max_swaps = 2 * k;
    }
    cfg.margin = a.margin;
    let outcome = with_threads(a.threads.unwrap_or(1), || build_partition(&graph, &cfg))
        .map_err(|e| e.to_string())?
        .map_err(|e| e.to_string())?;
    let mut json = outcome.to_json().map_err(|e| e.to_string())?;
    json.push('\n');
    emit(a.out.as_deref(), &json)
}
