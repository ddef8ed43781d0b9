//! Command-line front end: sweep driver, exhaustive-search comparison,
//! signaling-overhead report, and a gradient self-check.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use slicesim::agents::{greedy_allocate, Algorithm};
use slicesim::config::ScenarioConfig;
use slicesim::env::SliceEnv;
use slicesim::harness::{
    run_sweep, signaling_overhead, write_curves_csv, write_sweep_csv, GradCheckCase, SweepAxis,
    SweepJobResult,
};
use slicesim::oracle;
use slicesim::scenario::Scenario;

#[derive(Parser)]
#[command(name = "slice", version, about = "End-to-end network slicing simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train and evaluate allocators along a sweep axis, writing CSV files.
    Sim(SimArgs),
    /// Exhaustively search a tiny instance and compare the heuristic to it.
    Oracle(OracleArgs),
    /// Report per-round control-plane signaling for a scenario.
    Overhead(SourceArgs),
    /// Compare analytic network gradients against central differences.
    Gradcheck(GradArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Config file (key = value lines with [section] headers).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: "desk" (small, fast) or "paper" (full-scale reference).
    #[arg(long)]
    preset: Option<String>,
}

impl SourceArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.config, self.preset.as_deref()) {
            (Some(path), None) => ScenarioConfig::load(path)
                .with_context(|| format!("loading config {}", path.display())),
            (None, Some("desk")) => Ok(ScenarioConfig::desk()),
            (None, Some("paper")) => Ok(ScenarioConfig::paper()),
            (None, Some(other)) => bail!("unknown preset {other:?} (desk|paper)"),
            (None, None) => bail!("pass --config <file> or --preset <desk|paper>"),
            (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
        }
    }
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Sweep axis: users|demand|csi|delay|rmin.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated allocators, e.g. rdpg,sac,ddpg,dist,greedy.
    #[arg(long, default_value = "rdpg,sac,ddpg,dist,greedy")]
    algos: String,
    /// Number of independent seeds (runs use seeds 1..=N).
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Directory the CSV files land in.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Override the training episode count from the config.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    /// Config file for an instance small enough to enumerate.
    #[arg(long, conflicts_with = "variant")]
    tiny: Option<PathBuf>,
    /// Built-in tiny instance (0, 1, or 2) when no file is given.
    #[arg(long, default_value_t = 0)]
    variant: usize,
}

#[derive(Args)]
struct GradArgs {
    /// Number of random network configurations to probe.
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Worst acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Sim(args) => sim(args),
        Cmd::Oracle(args) => oracle_cmd(args),
        Cmd::Overhead(args) => overhead(args),
        Cmd::Gradcheck(args) => gradcheck(args),
    }
}

fn parse_algos(list: &str) -> Result<Vec<Algorithm>> {
    let mut out = Vec::new();
    for piece in list.split(',') {
        let algo: Algorithm = piece.parse().map_err(anyhow::Error::msg)?;
        if !out.contains(&algo) {
            out.push(algo);
        }
    }
    if out.is_empty() {
        bail!("--algos needs at least one allocator");
    }
    Ok(out)
}

fn sim(args: SimArgs) -> Result<()> {
    let mut cfg = args.source.load()?;
    if let Some(episodes) = args.episodes {
        cfg.agent.episodes = episodes;
    }
    let algos = parse_algos(&args.algos)?;
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let seeds: Vec<u64> = (1..=args.seeds).collect();
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let started = Instant::now();
    let rows = run_sweep(&cfg, args.axis, &algos, &seeds)?;
    let elapsed = started.elapsed();

    let sweep_path = args.out.join(format!("sweep_{}.csv", args.axis));
    let curves_path = args.out.join(format!("curves_{}.csv", args.axis));
    write_sweep_csv(&sweep_path, args.axis, &rows)?;
    write_curves_csv(&curves_path, args.axis, &rows)?;

    println!(
        "axis={} algos={} seeds={} episodes={} ({:.1}s)",
        args.axis,
        algos.iter().map(|a| a.label()).collect::<Vec<_>>().join(","),
        args.seeds,
        cfg.agent.episodes,
        elapsed.as_secs_f64()
    );
    print_summary(args.axis, &algos, &seeds, &rows);
    println!(
        "wrote {} ({} rows) and {}",
        sweep_path.display(),
        rows.len(),
        curves_path.display()
    );
    Ok(())
}

/// Seed-averaged evaluation rewards, one line per (value, allocator).
fn print_summary(axis: SweepAxis, algos: &[Algorithm], seeds: &[u64], rows: &[SweepJobResult]) {
    println!(
        "{:>10}  {:>9}  {:>12}  {:>12}  {:>7}",
        axis, "algorithm", "mean_reward", "rate_mbps", "served"
    );
    let mut values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    values.dedup();
    for &value in &values {
        for &algo in algos {
            let cell: Vec<&SweepJobResult> = rows
                .iter()
                .filter(|r| r.value == value && r.algorithm == algo)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let n = seeds.len().max(1) as f64;
            let reward = cell.iter().map(|r| r.summary.reward).sum::<f64>() / n;
            let rate = cell.iter().map(|r| r.summary.sum_rate_bps).sum::<f64>() / n / 1e6;
            let served = cell.iter().map(|r| r.summary.served_users).sum::<f64>() / n;
            println!(
                "{value:>10}  {:>9}  {reward:>12.4}  {rate:>12.2}  {served:>7.2}",
                algo.label()
            );
        }
    }
}

fn oracle_cmd(args: OracleArgs) -> Result<()> {
    let cfg = match &args.tiny {
        Some(path) => ScenarioConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => {
            if args.variant > 2 {
                bail!("--variant must be 0, 1, or 2");
            }
            oracle::tiny(args.variant)
        }
    };
    let scn = std::sync::Arc::new(Scenario::generate(&cfg)?);
    let mut env = SliceEnv::new(std::sync::Arc::clone(&scn));
    env.reset(cfg.scenario_seed);

    let started = Instant::now();
    let best = oracle::enumerate_best(&env)?;
    let elapsed = started.elapsed();
    println!(
        "searched {} combinations ({} feasible) in {:.2}s",
        best.evaluated,
        best.feasible,
        elapsed.as_secs_f64()
    );
    println!(
        "optimum: utility {:.6} $, reward {:.9}",
        best.utility, best.reward
    );

    let heuristic = greedy_allocate(&scn, env.channels(), env.demands());
    let ev = env.evaluate(&heuristic)?;
    println!(
        "heuristic: utility {:.6} $, reward {:.9}, violations {}",
        ev.utility,
        ev.reward,
        ev.violations.len()
    );
    if best.utility.abs() > 0.0 {
        println!(
            "heuristic reaches {:.2}% of the optimum",
            100.0 * ev.utility / best.utility
        );
    }
    Ok(())
}

fn overhead(args: SourceArgs) -> Result<()> {
    let cfg = args.load()?;
    let scn = Scenario::generate(&cfg)?;
    let oh = signaling_overhead(&scn);
    let radio = &scn.radio;
    println!(
        "radio reports: {} bits ({} cells x {} users x {} subchannels x 16)",
        oh.ran_bits, radio.n_bs, scn.n_users(), radio.n_subchannels
    );
    println!(
        "core reports:  {} bits ({} VM words + {} link words, 16 each)",
        oh.core_bits,
        scn.graph.node_count() * cfg.vms_per_node,
        scn.graph.link_count()
    );
    println!("total:         {} bits per decision round", oh.total_bits());
    Ok(())
}

fn gradcheck(args: GradArgs) -> Result<()> {
    let cases = slicesim::harness::gradient_check(args.cases, args.seed);
    let mut worst: Option<&GradCheckCase> = None;
    for case in &cases {
        println!("{:<40} {:>12.3e}", case.label, case.max_rel_err);
        if worst.is_none_or(|w| case.max_rel_err > w.max_rel_err) {
            worst = Some(case);
        }
    }
    let worst = worst.context("no cases ran")?;
    println!(
        "worst relative error {:.3e} over {} cases (tolerance {:.0e})",
        worst.max_rel_err,
        cases.len(),
        args.tol
    );
    if worst.max_rel_err > args.tol {
        bail!("gradient check failed at {}", worst.label);
    }
    Ok(())
}
