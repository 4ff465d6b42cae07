use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;

use deploysim_core::model::{classify_tier, TierBounds};
use deploysim_core::ranking::{RankMethod, ReliabilityMode};
use deploysim_core::runner::{expand_strategies, run_scenario, ScenarioConfig};
use deploysim_core::scenario::{generate_random_scenario, load_scenario, GenCounts, GenRanges};

/// Deterministic simulator of decentralised application deployment across
/// cloud-edge resource providers.
#[derive(Debug, Parser)]
#[command(name = "deploysim", version)]
struct Args {
    /// Infrastructure descriptor file (JSON).
    #[arg(long)]
    infra: Option<PathBuf>,

    /// Applications descriptor file (JSON).
    #[arg(long)]
    apps: Option<PathBuf>,

    /// Priority profiles: presets (latency, price, bandwidth, energy, equal),
    /// "random", or explicit latency:price:bandwidth:energy weights.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "energy,price,latency,bandwidth,equal,random"
    )]
    strategies: Vec<String>,

    /// Ranking methods: cost, borda.
    #[arg(long, value_delimiter = ',', default_value = "cost,borda")]
    methods: Vec<String>,

    /// Reliability mode: none, additive, multiplicative.
    #[arg(long, default_value = "none")]
    reliability: String,

    /// Run seeds; defaults to the seed carried by the infrastructure file.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,

    /// Output directory for CSVs, traces, and generated descriptors.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Write one NDJSON event trace per run.
    #[arg(long)]
    trace: bool,

    /// Generate random scenario descriptors instead of running.
    #[arg(long)]
    gen_scenario: bool,

    /// Seed for scenario generation.
    #[arg(long, default_value_t = 1)]
    gen_seed: u64,

    /// Number of applications to generate.
    #[arg(long, default_value_t = 6)]
    n_apps: u32,

    /// Number of capacities to generate.
    #[arg(long, default_value_t = 8)]
    n_capacities: u32,

    /// Abort a run whose offer-combination count exceeds this guard.
    #[arg(long, default_value_t = 1_000_000)]
    combination_guard: u64,
}

fn parse_method(name: &str) -> Result<RankMethod> {
    match name {
        "cost" => Ok(RankMethod::Cost),
        "borda" => Ok(RankMethod::Borda),
        "random" => Ok(RankMethod::Random),
        other => bail!("unknown method {other}; use cost, borda, or random"),
    }
}

fn parse_reliability(name: &str) -> Result<ReliabilityMode> {
    match name {
        "none" => Ok(ReliabilityMode::None),
        "additive" => Ok(ReliabilityMode::Additive),
        "multiplicative" => Ok(ReliabilityMode::Multiplicative),
        other => bail!("unknown reliability mode {other}; use none, additive, or multiplicative"),
    }
}

fn generate(args: &Args) -> Result<()> {
    let counts = GenCounts {
        applications: args.n_apps,
        capacities: args.n_capacities,
    };
    let scenario = generate_random_scenario(args.gen_seed, &counts, &GenRanges::default())?;
    let infra_path = args.out.join("infrastructure.json");
    let apps_path = args.out.join("applications.json");
    scenario.save(&infra_path, &apps_path)?;

    println!(
        "generated {} applications and {} capacities (seed {})",
        scenario.applications.len(),
        scenario.capacities.len(),
        args.gen_seed
    );
    let bounds = TierBounds::default();
    for cap in &scenario.capacities {
        let tier = classify_tier(cap, &bounds)?;
        println!(
            "  {}: {:?} {}@{} cpu={} ram={} storage={} bw={:.0}Mbps lat={:.0}ms {:.3}EUR/h",
            cap.id,
            tier,
            cap.provider,
            cap.location,
            cap.cpu_total,
            cap.ram_total,
            cap.storage_total,
            cap.bandwidth,
            cap.latency,
            cap.price_per_hour
        );
    }
    println!("wrote {}", infra_path.display());
    println!("wrote {}", apps_path.display());
    Ok(())
}

fn run(args: &Args) -> Result<()> {
    let infra_path = args
        .infra
        .clone()
        .context("--infra is required (or use --gen-scenario)")?;
    let apps_path = args
        .apps
        .clone()
        .context("--apps is required (or use --gen-scenario)")?;

    let methods = args
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<Vec<_>>>()?;
    let reliability = parse_reliability(&args.reliability)?;
    let strategies = expand_strategies(&args.strategies, &methods, reliability)?;

    let seeds = if args.seeds.is_empty() {
        let scenario = load_scenario(&infra_path, &apps_path)?;
        vec![scenario.seed]
    } else {
        args.seeds.clone()
    };

    let config = ScenarioConfig {
        infra_path,
        apps_path,
        strategies,
        seeds,
        out_dir: args.out.clone(),
        trace: args.trace,
        combination_guard: args.combination_guard,
    };
    let summary = run_scenario(&config)?;
    println!(
        "{} runs ok, {} failed; wrote {} and {}",
        summary.rows.len(),
        summary.failures.len(),
        summary.metrics_path.display(),
        summary.energy_path.display()
    );
    if !summary.all_ok() {
        bail!("{} run(s) failed", summary.failures.len());
    }
    Ok(())
}

fn main() -> Result<()> {
    let args = Args::parse();
    if args.gen_scenario {
        generate(&args)
    } else {
        run(&args)
    }
}
